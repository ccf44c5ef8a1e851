"""
Customer accounts, key evidence and suspect lists
File: vasps/accounts.py
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, Optional, Set

from pki.certificates import Certificate
from pki.crypto_core import Hash32, canonical_encode, digest, flag, text, u64
from utils.errors import ModelKeyMismatch


class CustodyModel(str, Enum):
    MEDIATED = "Mediated"
    KEY_CUSTODY = "KeyCustody"
    COMMINGLED = "Commingled"


@dataclass(frozen=True)
class KeyOperatorEvidence:
    """A VASP's legal custody of, and operation of, a customer key"""
    operator_vasp_id: str
    custody_agreement_id: str
    since_tick: int

    def encode(self) -> bytes:
        return canonical_encode([
            (1, text(self.operator_vasp_id)),
            (2, text(self.custody_agreement_id)),
            (3, u64(self.since_tick)),
        ])


@dataclass(frozen=True)
class KeyEvidence:
    """Ownership and operator evidence carried with a notice or an ack"""
    ownership: Optional[bytes] = None
    operator: Optional[KeyOperatorEvidence] = None
    custody_model: Optional[CustodyModel] = None

    def encode(self) -> bytes:
        return canonical_encode([
            (1, flag(self.ownership is not None)),
            (2, bytes(self.ownership or b"")),
            (3, flag(self.operator is not None)),
            (4, self.operator.encode() if self.operator else b""),
            (5, text(self.custody_model.value if self.custody_model else "")),
        ])


@dataclass
class Account:
    account_id: str
    subject_id: str
    attributes: Dict[str, str]
    custody_model: CustodyModel
    customer_public_key: Optional[bytes] = None
    custodied_private_key: Optional[bytes] = None
    certificate_serial: Optional[str] = None
    certificate: Optional[Certificate] = None
    key_ownership_evidence: Optional[Hash32] = None
    key_operator_evidence: Optional[KeyOperatorEvidence] = None

    def check_invariants(self):
        """
        Enforce key presence per custody model

        Raises:
            ModelKeyMismatch: If stored key material contradicts the model
        """
        model = self.custody_model
        has_public = self.customer_public_key is not None
        has_private = self.custodied_private_key is not None

        if model is CustodyModel.MEDIATED and (not has_public or has_private):
            raise ModelKeyMismatch(f"{self.account_id}: mediated accounts hold the public key only")
        if model is CustodyModel.KEY_CUSTODY and (
            not has_public or not has_private or self.key_operator_evidence is None
        ):
            raise ModelKeyMismatch(f"{self.account_id}: key custody needs both keys and operator evidence")
        if model is CustodyModel.COMMINGLED and (has_public or has_private):
            raise ModelKeyMismatch(f"{self.account_id}: commingled accounts store no customer keys")

    @property
    def public_key_hash(self) -> Optional[Hash32]:
        if self.customer_public_key is None:
            return None
        return digest(self.customer_public_key)

    def registered_attributes(self, vasp_id: str, settlement_key: bytes) -> Dict[str, str]:
        """
        Everything the VASP holds about the account, for assertions and CA registration

        Args:
            vasp_id: Holding VASP
            settlement_key: Key the account settles under (the VASP key when commingled)
        """
        registered = dict(self.attributes)
        registered.update({
            "account_id": self.account_id,
            "vasp_id": vasp_id,
            "custody_model": self.custody_model.value,
            "public_key_hash": digest(settlement_key).hex(),
        })
        return registered

    def key_evidence(self) -> KeyEvidence:
        return KeyEvidence(
            ownership=self.key_ownership_evidence,
            operator=self.key_operator_evidence,
            custody_model=self.custody_model,
        )


@dataclass
class SuspectList:
    """Designated parties: public-key hashes (hex) and account ids"""
    blocked: Set[str] = field(default_factory=set)
    version: int = 0

    def add(self, entries: Iterable[str]) -> int:
        """Add entries; the version only moves forward"""
        new = {_normalize(e) for e in entries} - self.blocked
        if new:
            self.blocked |= new
            self.version += 1
        return self.version

    def intersects(self, party_refs: Iterable[str]) -> bool:
        return any(_normalize(ref) in self.blocked for ref in party_refs if ref)


def _looks_hex(value: str) -> bool:
    value = value.strip()
    return len(value) == 64 and all(c in "0123456789abcdefABCDEF" for c in value)


def _normalize(ref: str) -> str:
    return ref.strip().lower() if _looks_hex(ref) else ref.strip()
