"""
VASP package - accounts, custody, travel-rule messages, records and the node actor
File: vasps/__init__.py
"""

from .accounts import Account, CustodyModel, SuspectList
from .messages import DenyReason, RejectReason, Target, TransferAck, TransferNotice, TransferRequest
from .records import RecordStatus, RecordStore, Role, TravelRuleRecord

__all__ = [
    'Account',
    'CustodyModel',
    'SuspectList',
    'DenyReason',
    'RejectReason',
    'Target',
    'TransferAck',
    'TransferNotice',
    'TransferRequest',
    'RecordStatus',
    'RecordStore',
    'Role',
    'TravelRuleRecord',
]
