"""
Mediated custody: the customer keeps the private key in a wallet
File: vasps/custody/mediated.py
"""
from dataclasses import dataclass
from typing import Optional

from chain.chain_sim import ChainTransaction
from pki.crypto_core import KeyPair
from utils.errors import KeyUnavailable, ModelKeyMismatch
from vasps.accounts import Account, CustodyModel
from vasps.custody.base_custody import BaseCustodyHandler


@dataclass(frozen=True)
class CustomerWallet:
    """A key holder outside the VASP: mediated customers and P2P parties"""
    owner_id: str
    keypair: KeyPair

    @property
    def public_key(self) -> bytes:
        return self.keypair.public_key

    def sign_transaction(self, tx: ChainTransaction) -> ChainTransaction:
        return tx.signed(self.keypair.private_key)


class MediatedCustodyHandler(BaseCustodyHandler):
    """The VASP relays the transaction to the customer's co-located wallet for signing"""

    model = CustodyModel.MEDIATED

    def provision(self, account: Account, supplied_public_key: Optional[bytes], now: int) -> Account:
        if supplied_public_key is None:
            raise ModelKeyMismatch(f"{account.account_id}: mediated accounts need the customer's public key")
        account.customer_public_key = bytes(supplied_public_key)
        account.check_invariants()
        return account

    def settlement_public_key(self, account: Account) -> bytes:
        return account.customer_public_key

    def sign_transaction(self, account: Account, tx: ChainTransaction) -> ChainTransaction:
        wallet = self.node.wallets.get(account.customer_public_key)
        if wallet is None:
            raise KeyUnavailable(f"{account.account_id}: no wallet attached for the customer key")
        return wallet.sign_transaction(tx)
