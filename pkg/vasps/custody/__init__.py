"""
Custody handlers package - one handler per custody model
File: vasps/custody/__init__.py
"""

from .base_custody import BaseCustodyHandler
from .mediated import CustomerWallet, MediatedCustodyHandler
from .key_custody import KeyCustodyHandler
from .commingled import CommingledCustodyHandler

__all__ = [
    'BaseCustodyHandler',
    'CustomerWallet',
    'MediatedCustodyHandler',
    'KeyCustodyHandler',
    'CommingledCustodyHandler',
]
