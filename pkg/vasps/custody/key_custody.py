"""
Key custody: the VASP generates, holds and operates the customer's key
File: vasps/custody/key_custody.py
"""
from typing import Optional

from chain.chain_sim import ChainTransaction
from pki.crypto_core import generate_keypair
from utils.errors import KeyUnavailable
from vasps.accounts import Account, CustodyModel, KeyOperatorEvidence
from vasps.custody.base_custody import BaseCustodyHandler


class KeyCustodyHandler(BaseCustodyHandler):
    model = CustodyModel.KEY_CUSTODY

    def provision(self, account: Account, supplied_public_key: Optional[bytes], now: int) -> Account:
        self._reject_supplied_key(account, supplied_public_key)

        keypair = generate_keypair(self.node.key_seed("custody", account.account_id))
        account.customer_public_key = keypair.public_key
        account.custodied_private_key = keypair.private_key
        account.key_operator_evidence = KeyOperatorEvidence(
            operator_vasp_id=self.node.actor_id,
            custody_agreement_id=f"{self.node.actor_id}/custody/{account.account_id}",
            since_tick=now,
        )
        account.check_invariants()
        return account

    def settlement_public_key(self, account: Account) -> bytes:
        return account.customer_public_key

    def sign_transaction(self, account: Account, tx: ChainTransaction) -> ChainTransaction:
        if account.custodied_private_key is None:
            raise KeyUnavailable(f"{account.account_id}: custodied key missing")
        return tx.signed(account.custodied_private_key)
