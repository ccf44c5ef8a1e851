"""
Base custody handler with the behaviour shared by every custody model
File: vasps/custody/base_custody.py
"""
from abc import ABC, abstractmethod
from typing import TYPE_CHECKING, Optional

from chain.chain_sim import ChainTransaction
from pki.certificates import Certificate
from utils.errors import ModelKeyMismatch
from vasps.accounts import Account, CustodyModel, KeyEvidence

if TYPE_CHECKING:
    from vasps.vasp_node import VaspNode


class BaseCustodyHandler(ABC):
    """Base class for the per-model key handling of a VASP node"""

    model: CustodyModel

    def __init__(self, node: "VaspNode"):
        """
        Initialize handler

        Args:
            node: VASP node whose accounts this handler serves
        """
        self.node = node

    @abstractmethod
    def provision(self, account: Account, supplied_public_key: Optional[bytes], now: int) -> Account:
        """
        Fill in key material and evidence for a newly opened account

        Args:
            account: Account without keys
            supplied_public_key: Key the customer brought, if any
            now: Current tick

        Returns:
            The account, satisfying its custody invariants

        Raises:
            ModelKeyMismatch: If the supplied key contradicts the model
        """
        pass

    @abstractmethod
    def settlement_public_key(self, account: Account) -> bytes:
        """
        Key that funds leave from on chain

        Returns:
            32-byte public key
        """
        pass

    @abstractmethod
    def sign_transaction(self, account: Account, tx: ChainTransaction) -> ChainTransaction:
        """
        Sign with the model-appropriate private key

        Raises:
            KeyUnavailable: If that key cannot be reached
        """
        pass

    def subject_certificate(self, account: Account) -> Optional[Certificate]:
        """Certificate the customer's assertions link to"""
        return account.certificate

    def key_evidence(self, account: Account) -> KeyEvidence:
        return account.key_evidence()

    def prepare_transaction(
        self,
        account: Account,
        to_public_key: bytes,
        amount: int,
        asset_type: str,
        nonce: bytes,
    ) -> ChainTransaction:
        """Unsigned transaction; its tx_id is the binding announced in the notice"""
        return ChainTransaction(
            from_public_key=self.settlement_public_key(account),
            to_public_key=bytes(to_public_key),
            amount=amount,
            asset_type=asset_type,
            nonce=nonce,
        )

    def _reject_supplied_key(self, account: Account, supplied_public_key: Optional[bytes]):
        if supplied_public_key is not None:
            raise ModelKeyMismatch(f"{account.account_id}: {self.model.value} accounts take no customer key")
