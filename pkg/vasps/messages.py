"""
Messages exchanged between VASP nodes and the results of transfer steps
File: vasps/messages.py
"""
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, List, Optional, Tuple, Union

from pki.assertion_service import AttributeAssertion
from pki.certificates import Certificate
from pki.crypto_core import (
    Hash32,
    KeyPair,
    canonical_encode,
    digest,
    encode_sequence,
    flag,
    sign,
    text,
    u64,
    verify,
)
from vasps.accounts import KeyEvidence


def _optional(value: Optional[bytes]) -> bytes:
    return canonical_encode([(1, flag(value is not None)), (2, value or b"")])


@dataclass(frozen=True)
class BeneficiaryRef:
    public_key_hash: bytes
    account_id: Optional[str] = None

    def encode(self) -> bytes:
        return canonical_encode([
            (1, bytes(self.public_key_hash)),
            (2, _optional(text(self.account_id) if self.account_id is not None else None)),
        ])

    def party_refs(self) -> List[str]:
        refs = [bytes(self.public_key_hash).hex()]
        if self.account_id:
            refs.append(self.account_id)
        return refs


@dataclass(frozen=True)
class BatchEntry:
    beneficiary_ref: BeneficiaryRef
    amount: int
    originator_account_id: str
    originator_assertion: Optional[AttributeAssertion] = None

    def encode(self) -> bytes:
        return canonical_encode([
            (1, self.beneficiary_ref.encode()),
            (2, u64(self.amount)),
            (3, text(self.originator_account_id)),
            (4, _optional(self.originator_assertion.to_bytes() if self.originator_assertion else None)),
        ])


@dataclass(frozen=True)
class TransferNotice:
    """Off-chain travel-rule notice, signed by the Originator-VASP"""
    notice_id: bytes
    originator_vasp_id: str
    beneficiary_vasp_id: str
    originator_assertion: Optional[AttributeAssertion]
    beneficiary_ref: BeneficiaryRef
    asset_type: str
    amount: int
    execution_tick: int
    intended_chain_tx_binding: Hash32
    originator_vasp_certificate: Certificate
    originator_subject_certificate: Certificate
    originator_evidence: KeyEvidence = KeyEvidence()
    batch_entries: Optional[Tuple[BatchEntry, ...]] = None
    originator_vasp_signature: bytes = b""

    def __post_init__(self):
        if self.batch_entries is not None:
            if not self.batch_entries:
                raise ValueError("batch must have at least one entry")
            total = sum(e.amount for e in self.batch_entries)
            if total != self.amount:
                raise ValueError(f"batch entries sum to {total}, notice amount is {self.amount}")

    @property
    def is_batch(self) -> bool:
        return self.batch_entries is not None

    def entries(self) -> Tuple[BatchEntry, ...]:
        """Batch entries, or the single implied entry of a plain transfer"""
        if self.batch_entries is not None:
            return self.batch_entries
        subject = self.originator_assertion.subject_id if self.originator_assertion else ""
        return (BatchEntry(self.beneficiary_ref, self.amount, subject, self.originator_assertion),)

    def tbs_bytes(self) -> bytes:
        batch = None
        if self.batch_entries is not None:
            batch = encode_sequence(e.encode() for e in self.batch_entries)
        return canonical_encode([
            (1, self.notice_id),
            (2, text(self.originator_vasp_id)),
            (3, text(self.beneficiary_vasp_id)),
            (4, _optional(self.originator_assertion.to_bytes() if self.originator_assertion else None)),
            (5, self.beneficiary_ref.encode()),
            (6, text(self.asset_type)),
            (7, u64(self.amount)),
            (8, u64(self.execution_tick)),
            (9, bytes(self.intended_chain_tx_binding)),
            (10, self.originator_vasp_certificate.to_bytes()),
            (11, self.originator_subject_certificate.to_bytes()),
            (12, self.originator_evidence.encode()),
            (13, _optional(batch)),
        ])

    def to_bytes(self) -> bytes:
        return canonical_encode([(1, self.tbs_bytes()), (2, self.originator_vasp_signature)])

    def signed(self, keypair: KeyPair) -> "TransferNotice":
        return replace(self, originator_vasp_signature=sign(keypair.private_key, self.tbs_bytes()))

    def signature_valid(self) -> bool:
        return verify(
            self.originator_vasp_certificate.subject_public_key,
            self.tbs_bytes(),
            self.originator_vasp_signature,
        )


class AckDecision(str, Enum):
    ACCEPT = "Accept"
    REJECT = "Reject"


class RejectReason(str, Enum):
    UNKNOWN_BENEFICIARY = "UnknownBeneficiary"
    SUSPECT_PARTY = "SuspectParty"
    CERT_INVALID = "CertInvalid"
    POLICY_REFUSAL = "PolicyRefusal"


@dataclass(frozen=True)
class TransferAck:
    """
    Beneficiary-VASP decision on a notice

    On Accept there is one beneficiary assertion, certificate and evidence
    per notice entry, in entry order.
    """
    notice_id: bytes
    beneficiary_vasp_id: str
    decision: AckDecision
    reason: Optional[RejectReason] = None
    beneficiary_assertions: Tuple[AttributeAssertion, ...] = ()
    beneficiary_certificates: Tuple[Certificate, ...] = ()
    beneficiary_evidences: Tuple[KeyEvidence, ...] = ()
    beneficiary_vasp_certificate: Optional[Certificate] = None
    beneficiary_vasp_signature: bytes = b""

    def __post_init__(self):
        if (self.decision is AckDecision.REJECT) != (self.reason is not None):
            raise ValueError("a reason is given exactly when the notice is rejected")

    @property
    def accepted(self) -> bool:
        return self.decision is AckDecision.ACCEPT

    @property
    def beneficiary_assertion(self) -> Optional[AttributeAssertion]:
        return self.beneficiary_assertions[0] if self.beneficiary_assertions else None

    def tbs_bytes(self) -> bytes:
        return canonical_encode([
            (1, self.notice_id),
            (2, text(self.beneficiary_vasp_id)),
            (3, text(self.decision.value)),
            (4, text(self.reason.value if self.reason else "")),
            (5, encode_sequence(a.to_bytes() for a in self.beneficiary_assertions)),
            (6, encode_sequence(c.to_bytes() for c in self.beneficiary_certificates)),
            (7, encode_sequence(e.encode() for e in self.beneficiary_evidences)),
            (8, _optional(self.beneficiary_vasp_certificate.to_bytes() if self.beneficiary_vasp_certificate else None)),
        ])

    def to_bytes(self) -> bytes:
        return canonical_encode([(1, self.tbs_bytes()), (2, self.beneficiary_vasp_signature)])

    def signed(self, keypair: KeyPair) -> "TransferAck":
        return replace(self, beneficiary_vasp_signature=sign(keypair.private_key, self.tbs_bytes()))

    def signature_valid(self, signer_certificate: Certificate) -> bool:
        return verify(signer_certificate.subject_public_key, self.tbs_bytes(), self.beneficiary_vasp_signature)


@dataclass(frozen=True)
class BindingMismatchReport:
    """Originator tells the beneficiary that the confirmed transaction broke the notice binding"""
    notice_id: bytes
    chain_tx_id: bytes


# Transfer outcomes

class DenyReason(str, Enum):
    NO_ORIGINATOR_CERT = "NoOriginatorCert"
    BENEFICIARY_UNRESOLVED = "BeneficiaryUnresolved"
    CERT_INVALID = "CertInvalid"
    SUSPECT_PARTY = "SuspectParty"
    ACK_REJECTED = "AckRejected"
    CHANNEL_TIMEOUT = "ChannelTimeout"
    POLICY_REFUSAL = "PolicyRefusal"
    KEY_UNAVAILABLE = "KeyUnavailable"
    CHAIN_REJECTED = "ChainRejected"


@dataclass(frozen=True)
class Denied:
    reason: DenyReason
    detail: str = ""

    @property
    def label(self) -> str:
        """'CertInvalid(beneficiary)', 'AckRejected(SuspectParty)', 'ChannelTimeout', ..."""
        return f"{self.reason.value}({self.detail})" if self.detail else self.reason.value


@dataclass(frozen=True)
class Broadcast:
    chain_tx_id: bytes
    record_id: str


TransferOutcome = Union[Broadcast, Denied]


# Beneficiary resolution

@dataclass(frozen=True)
class Target:
    """What the originator knows about the beneficiary: a key, its hash, or (vasp, account)"""
    public_key: Optional[bytes] = None
    public_key_hash: Optional[bytes] = None
    vasp_id: Optional[str] = None
    account_id: Optional[str] = None

    def __post_init__(self):
        forms = [self.public_key is not None, self.public_key_hash is not None, self.account_id is not None]
        if sum(forms) != 1:
            raise ValueError("target is exactly one of: public key, key hash, (vasp, account)")
        if self.account_id is not None and not self.vasp_id:
            raise ValueError("account targets name their VASP")

    @classmethod
    def of_key(cls, public_key: bytes) -> "Target":
        return cls(public_key=bytes(public_key))

    @classmethod
    def of_hash(cls, key_hash: bytes) -> "Target":
        return cls(public_key_hash=bytes(key_hash))

    @classmethod
    def of_account(cls, vasp_id: str, account_id: str) -> "Target":
        return cls(vasp_id=vasp_id, account_id=account_id)

    @property
    def key_hash(self) -> Optional[bytes]:
        if self.public_key is not None:
            return bytes(digest(self.public_key))
        return self.public_key_hash

    def party_refs(self) -> List[str]:
        if self.account_id is not None:
            return [self.account_id]
        return [self.key_hash.hex()]


@dataclass(frozen=True)
class ResolvedBeneficiary:
    certificate: Certificate
    home_vasp_id: str
    home_vasp_certificate: Optional[Certificate]
    resolution_path: Tuple[str, ...]
    network_path: Tuple[str, ...] = ()
    attributes: Optional[Dict[str, str]] = None
    account_id: Optional[str] = None
    revoked: bool = False

    @property
    def public_key_hash(self) -> Hash32:
        return digest(self.certificate.subject_public_key)

    @property
    def beneficiary_ref(self) -> BeneficiaryRef:
        return BeneficiaryRef(bytes(self.public_key_hash), self.account_id)


@dataclass(frozen=True)
class Unresolved:
    resolution_path: Tuple[str, ...]
    reason: str = ""


ResolutionResult = Union[ResolvedBeneficiary, Unresolved]


# Queries

class QueryStatus(str, Enum):
    GOOD = "good"
    REVOKED = "revoked"


@dataclass(frozen=True)
class AccountInquiry:
    account_id: str


@dataclass(frozen=True)
class QueryResponse:
    """Certificate held by the responder, plus an optional disclosure-filtered assertion"""
    certificate: Certificate
    responder_vasp_id: str
    responder_certificate: Certificate
    status: QueryStatus = QueryStatus.GOOD
    assertion: Optional[AttributeAssertion] = None
    account_id: Optional[str] = None
    hops: Tuple[str, ...] = ()
    networks: Tuple[str, ...] = ()


@dataclass(frozen=True)
class NotFound:
    reason: str
    hops: Tuple[str, ...] = ()


QueryResult = Union[QueryResponse, NotFound]


@dataclass(frozen=True)
class CrossNetworkQuery:
    public_key_hash: bytes
    requester_id: str
    hops: Tuple[str, ...]
    networks: Tuple[str, ...]
    deadline: int

    def forwarded(self, hop: str, network_id: str) -> "CrossNetworkQuery":
        networks = self.networks if self.networks and self.networks[-1] == network_id else self.networks + (network_id,)
        return replace(self, hops=self.hops + (hop,), networks=networks)


@dataclass(frozen=True)
class CertLookup:
    """Lookup-by-public-key request to a CA; either field may be given"""
    public_key: Optional[bytes] = None
    key_hash: Optional[bytes] = None


@dataclass(frozen=True)
class TransferRequest:
    """One customer transfer as the originator receives it"""
    account_id: str
    target: Target
    amount: int

    def __post_init__(self):
        if self.amount <= 0:
            raise ValueError("amount must be > 0")
