"""
Identifier helpers: hex parsing, short prefixes, seeded sub-streams
File: utils/id_utils.py
"""
import hashlib
import random
import re
from typing import Any

_ID_PATTERN = re.compile(r'^[A-Za-z0-9][A-Za-z0-9_.\-]*$')


def from_hex(value: str) -> bytes:
    """
    Parse a hex string, tolerating an optional '0x' prefix and whitespace

    Args:
        value: Hex string

    Returns:
        Decoded bytes

    Raises:
        ValueError: If value is not valid hex
    """
    value = value.strip().lower()
    if value.startswith('0x'):
        value = value[2:]
    return bytes.fromhex(value)


def short_hash(value: bytes, length: int = 12) -> str:
    """Hex prefix used in reports and route dumps"""
    return value.hex()[:length]


def is_valid_id(id_value: Any) -> bool:
    """
    Check that an identifier is usable as an actor, network or account id

    Args:
        id_value: ID to validate

    Returns:
        True if valid, False otherwise
    """
    if not id_value:
        return False
    return bool(_ID_PATTERN.match(str(id_value).strip()))


def derive_seed(master_seed: int, *labels: str) -> bytes:
    """
    Derive a 32-byte seed for a named sub-stream of a simulation

    Args:
        master_seed: Scenario seed
        *labels: Names that make the sub-stream unique ('wallet', customer id, ...)

    Returns:
        32 bytes, stable for identical inputs
    """
    h = hashlib.sha256(master_seed.to_bytes(8, 'big', signed=False))
    for label in labels:
        encoded = label.encode('utf-8')
        h.update(len(encoded).to_bytes(4, 'big'))
        h.update(encoded)
    return h.digest()


def derive_rng(master_seed: int, *labels: str) -> random.Random:
    """Seeded PRNG for a named sub-stream (per link, per CA, ...)"""
    return random.Random(int.from_bytes(derive_seed(master_seed, *labels), 'big'))
