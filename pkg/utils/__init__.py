"""
Utility functions package
File: utils/__init__.py
"""

from .file_utils import load_json, save_json, save_bytes
from .id_utils import from_hex, short_hash, is_valid_id, derive_seed, derive_rng
from .logging_utils import configure_logging, get_logger

__all__ = [
    'load_json',
    'save_json',
    'save_bytes',
    'from_hex',
    'short_hash',
    'is_valid_id',
    'derive_seed',
    'derive_rng',
    'configure_logging',
    'get_logger',
]
