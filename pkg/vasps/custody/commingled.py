"""
Commingled custody: customers settle under the VASP's own key
File: vasps/custody/commingled.py

There is no customer certificate. The VASP certificate stands in for it,
both as the assertion link and as the key-ownership evidence.
"""
from typing import Optional

from chain.chain_sim import ChainTransaction
from pki.certificates import Certificate
from utils.errors import KeyUnavailable
from vasps.accounts import Account, CustodyModel, KeyEvidence
from vasps.custody.base_custody import BaseCustodyHandler


class CommingledCustodyHandler(BaseCustodyHandler):
    model = CustodyModel.COMMINGLED

    def provision(self, account: Account, supplied_public_key: Optional[bytes], now: int) -> Account:
        self._reject_supplied_key(account, supplied_public_key)
        account.check_invariants()
        return account

    def settlement_public_key(self, account: Account) -> bytes:
        return self.node.keypair.public_key

    def sign_transaction(self, account: Account, tx: ChainTransaction) -> ChainTransaction:
        if self.node.keypair is None:
            raise KeyUnavailable(f"{self.node.actor_id}: VASP key unavailable")
        return tx.signed(self.node.keypair.private_key)

    def subject_certificate(self, account: Account) -> Optional[Certificate]:
        return self.node.certificate

    def key_evidence(self, account: Account) -> KeyEvidence:
        certificate = self.node.certificate
        return KeyEvidence(
            ownership=certificate.fingerprint if certificate else None,
            custody_model=self.model,
        )
