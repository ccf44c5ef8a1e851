"""
Chain package
File: chain/__init__.py
"""

from .chain_sim import ChainTransaction, Ledger

__all__ = ['ChainTransaction', 'Ledger']
