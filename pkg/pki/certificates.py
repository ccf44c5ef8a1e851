"""
Certificate, CRL and status types plus certificate validation
File: pki/certificates.py
"""
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple, Union

from pki.crypto_core import (
    SIGNATURE_ALGORITHM,
    Hash32,
    canonical_decode,
    canonical_encode,
    decode_sequence,
    digest,
    encode_sequence,
    encode_text_set,
    text,
    u64,
    verify,
)

CERTIFICATE_VERSION = 3
SIGNATURE_ONLY = "signature-only"


class CertificateClass(IntEnum):
    """Assurance grade assigned at registration"""
    CLASS1 = 1
    CLASS2 = 2
    CLASS3 = 3

    @property
    def label(self) -> str:
        return f"Class{int(self)}"

    @classmethod
    def parse(cls, value: Union[str, int, "CertificateClass"]) -> "CertificateClass":
        if isinstance(value, CertificateClass):
            return value
        if isinstance(value, int):
            return cls(value)
        return cls(int(str(value).lower().replace("class", "")))


@dataclass(frozen=True)
class CertificateProfile:
    """Usage constraints carried in certificate extensions"""
    profile_id: str
    permitted_usage: FrozenSet[str] = frozenset({SIGNATURE_ONLY})
    permitted_chains: FrozenSet[str] = frozenset()
    minimum_class: CertificateClass = CertificateClass.CLASS1

    def __post_init__(self):
        # encryption usage is never granted
        if frozenset(self.permitted_usage) != frozenset({SIGNATURE_ONLY}):
            raise ValueError(f"profile {self.profile_id}: usage must be exactly {SIGNATURE_ONLY}")
        object.__setattr__(self, 'permitted_usage', frozenset(self.permitted_usage))
        object.__setattr__(self, 'permitted_chains', frozenset(self.permitted_chains))

    def encode(self) -> bytes:
        return canonical_encode([
            (1, text(self.profile_id)),
            (2, encode_text_set(self.permitted_usage)),
            (3, encode_text_set(self.permitted_chains)),
            (4, u64(self.minimum_class)),
        ])

    @classmethod
    def decode(cls, data: bytes) -> "CertificateProfile":
        record = canonical_decode(data)
        return cls(
            profile_id=record.get(1).decode('utf-8'),
            permitted_usage=frozenset(v.decode('utf-8') for v in decode_sequence(record.get(2))),
            permitted_chains=frozenset(v.decode('utf-8') for v in decode_sequence(record.get(3))),
            minimum_class=CertificateClass(int.from_bytes(record.get(4), 'big')),
        )


CUSTOMER_PROFILE = CertificateProfile("customer")
VASP_PROFILE = CertificateProfile("vasp", minimum_class=CertificateClass.CLASS3)
ROOT_PROFILE = CertificateProfile("root")


@dataclass(frozen=True)
class Certificate:
    """X.509-style binding of a subject id to an Ed25519 public key"""
    serial: str
    issuer_id: str
    validity_not_before: int
    validity_not_after: int
    subject_id: str
    subject_public_key: bytes
    profile: CertificateProfile
    cert_class: CertificateClass
    issuer_signature: bytes = b""
    version: int = CERTIFICATE_VERSION
    signature_algorithm: str = SIGNATURE_ALGORITHM

    def tbs_bytes(self) -> bytes:
        """To-be-signed bytes: every field preceding the signature"""
        extensions = canonical_encode([
            (1, self.profile.encode()),
            (2, text(self.cert_class.label)),
        ])
        return canonical_encode([
            (1, u64(self.version)),
            (2, bytes.fromhex(self.serial)),
            (3, text(self.signature_algorithm)),
            (4, text(self.issuer_id)),
            (5, u64(self.validity_not_before)),
            (6, u64(self.validity_not_after)),
            (7, text(self.subject_id)),
            (8, self.subject_public_key),
            (9, extensions),
        ])

    def to_bytes(self) -> bytes:
        return canonical_encode([(1, self.tbs_bytes()), (2, self.issuer_signature)])

    @classmethod
    def from_bytes(cls, data: bytes) -> "Certificate":
        outer = canonical_decode(data)
        tbs = canonical_decode(outer.get(1))
        extensions = canonical_decode(tbs.get(9))
        return cls(
            version=int.from_bytes(tbs.get(1), 'big'),
            serial=tbs.get(2).hex(),
            signature_algorithm=tbs.get(3).decode('utf-8'),
            issuer_id=tbs.get(4).decode('utf-8'),
            validity_not_before=int.from_bytes(tbs.get(5), 'big'),
            validity_not_after=int.from_bytes(tbs.get(6), 'big'),
            subject_id=tbs.get(7).decode('utf-8'),
            subject_public_key=tbs.get(8),
            profile=CertificateProfile.decode(extensions.get(1)),
            cert_class=CertificateClass.parse(extensions.get(2).decode('utf-8')),
            issuer_signature=outer.get(2),
        )

    @property
    def fingerprint(self) -> Hash32:
        """Digest of the full certificate bytes (the assertion/evidence link)"""
        return digest(self.to_bytes())

    @property
    def public_key_hash(self) -> Hash32:
        return digest(self.subject_public_key)

    @property
    def is_self_signed(self) -> bool:
        return self.issuer_id == self.subject_id

    def within_validity(self, now: int) -> bool:
        return self.validity_not_before <= now <= self.validity_not_after


class RevocationReason(str, Enum):
    KEY_COMPROMISE = "keyCompromise"
    AFFILIATION_CHANGED = "affiliationChanged"
    SUPERSEDED = "superseded"
    CESSATION_OF_OPERATION = "cessationOfOperation"
    UNSPECIFIED = "unspecified"


@dataclass(frozen=True)
class RevocationEntry:
    serial: str
    reason: RevocationReason
    revoked_at: int

    def encode(self) -> bytes:
        return canonical_encode([
            (1, bytes.fromhex(self.serial)),
            (2, text(self.reason.value)),
            (3, u64(self.revoked_at)),
        ])

    @classmethod
    def decode(cls, data: bytes) -> "RevocationEntry":
        record = canonical_decode(data)
        return cls(
            serial=record.get(1).hex(),
            reason=RevocationReason(record.get(2).decode('utf-8')),
            revoked_at=int.from_bytes(record.get(3), 'big'),
        )


def _sorted_entries(entries: Iterable[RevocationEntry]) -> Tuple[RevocationEntry, ...]:
    return tuple(sorted(entries, key=lambda e: e.serial))


def encode_entries(entries: Iterable[RevocationEntry]) -> bytes:
    return encode_sequence(e.encode() for e in _sorted_entries(entries))


@dataclass(frozen=True)
class Crl:
    issuer_id: str
    crl_number: int
    entries: Tuple[RevocationEntry, ...]
    issued_at: int
    signature: bytes = b""

    def tbs_bytes(self) -> bytes:
        return canonical_encode([
            (1, text(self.issuer_id)),
            (2, u64(self.crl_number)),
            (3, encode_entries(self.entries)),
            (4, u64(self.issued_at)),
        ])

    def to_bytes(self) -> bytes:
        return canonical_encode([(1, self.tbs_bytes()), (2, self.signature)])


@dataclass(frozen=True)
class DeltaCrl:
    issuer_id: str
    crl_number: int
    base_crl_number: int
    entries: Tuple[RevocationEntry, ...]
    issued_at: int
    signature: bytes = b""

    def tbs_bytes(self) -> bytes:
        return canonical_encode([
            (1, text(self.issuer_id)),
            (2, u64(self.crl_number)),
            (3, u64(self.base_crl_number)),
            (4, encode_entries(self.entries)),
            (5, u64(self.issued_at)),
        ])

    def to_bytes(self) -> bytes:
        return canonical_encode([(1, self.tbs_bytes()), (2, self.signature)])


def apply_delta_crl(base: Crl, delta: DeltaCrl) -> Crl:
    """Fold a delta into its base, yielding the unsigned full-CRL equivalent"""
    if delta.issuer_id != base.issuer_id or delta.base_crl_number > base.crl_number:
        raise ValueError("delta does not apply to this base")
    merged = {e.serial: e for e in base.entries}
    for entry in delta.entries:
        merged.setdefault(entry.serial, entry)
    return Crl(
        issuer_id=base.issuer_id,
        crl_number=delta.crl_number,
        entries=_sorted_entries(merged.values()),
        issued_at=delta.issued_at,
    )


class CertStatus(str, Enum):
    GOOD = "good"
    REVOKED = "revoked"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class CertificateStatusResponse:
    serial: str
    status: CertStatus
    produced_at: int
    responder_id: str
    reason: Optional[RevocationReason] = None
    revoked_at: Optional[int] = None
    responder_signature: bytes = b""

    def tbs_bytes(self) -> bytes:
        return canonical_encode([
            (1, bytes.fromhex(self.serial)),
            (2, text(self.status.value)),
            (3, text(self.reason.value if self.reason else "")),
            (4, u64(self.revoked_at if self.revoked_at is not None else 0)),
            (5, u64(self.produced_at)),
            (6, text(self.responder_id)),
        ])

    def verify(self, responder_certificate: Certificate) -> bool:
        return verify(
            responder_certificate.subject_public_key,
            self.tbs_bytes(),
            self.responder_signature,
        )


class ValidationStatus(str, Enum):
    VALID = "Valid"
    EXPIRED = "Expired"
    REVOKED = "Revoked"
    BAD_SIGNATURE = "BadSignature"
    UNKNOWN_ISSUER = "UnknownIssuer"
    PROFILE_VIOLATION = "ProfileViolation"


@dataclass(frozen=True)
class ValidationResult:
    status: ValidationStatus
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.status is ValidationStatus.VALID

    def __str__(self) -> str:
        return f"{self.status.value}({self.detail})" if self.detail else self.status.value


VALID = ValidationResult(ValidationStatus.VALID)


@dataclass
class _IssuerRevocations:
    base: Optional[Crl] = None
    deltas: List[DeltaCrl] = field(default_factory=list)
    crl_number: int = 0
    entries: Dict[str, RevocationEntry] = field(default_factory=dict)


class RevocationView:
    """
    A relying party's merged view of revocations, per issuer

    Holds the latest signed full CRL plus the signed deltas folded on top of
    it, so the view can be re-exported to other members verbatim.
    """

    def __init__(self):
        self._issuers: Dict[str, _IssuerRevocations] = {}

    def crl_number(self, issuer_id: str) -> int:
        state = self._issuers.get(issuer_id)
        return state.crl_number if state else 0

    def is_revoked(self, issuer_id: str, serial: str) -> bool:
        state = self._issuers.get(issuer_id)
        return bool(state and serial in state.entries)

    def entry(self, issuer_id: str, serial: str) -> Optional[RevocationEntry]:
        state = self._issuers.get(issuer_id)
        return state.entries.get(serial) if state else None

    def entries(self, issuer_id: str) -> Tuple[RevocationEntry, ...]:
        state = self._issuers.get(issuer_id)
        return _sorted_entries(state.entries.values()) if state else ()

    def revoked_serials(self) -> Dict[str, FrozenSet[str]]:
        return {issuer: frozenset(s.entries) for issuer, s in self._issuers.items()}

    def apply_crl(self, crl: Crl, issuer_certificate: Optional[Certificate] = None) -> bool:
        """
        Install a full CRL if it is newer than what the view holds

        Args:
            crl: Signed full CRL
            issuer_certificate: When given, the CRL signature must verify under it

        Returns:
            True if the view changed
        """
        if issuer_certificate is not None and not verify(
            issuer_certificate.subject_public_key, crl.tbs_bytes(), crl.signature
        ):
            return False

        state = self._issuers.setdefault(crl.issuer_id, _IssuerRevocations())
        if crl.crl_number <= state.crl_number:
            return False

        # entries only ever grow, so keep anything already known
        merged = {e.serial: e for e in crl.entries}
        for serial, entry in state.entries.items():
            merged.setdefault(serial, entry)
        state.base = crl
        state.deltas = []
        state.crl_number = crl.crl_number
        state.entries = merged
        return True

    def apply_delta(self, delta: DeltaCrl, issuer_certificate: Optional[Certificate] = None) -> bool:
        """
        Fold a delta CRL into the view

        Returns:
            True if applied; False if stale, unverifiable, or its base is newer
            than the view (a full CRL is then needed)
        """
        if issuer_certificate is not None and not verify(
            issuer_certificate.subject_public_key, delta.tbs_bytes(), delta.signature
        ):
            return False

        state = self._issuers.setdefault(delta.issuer_id, _IssuerRevocations())
        if delta.crl_number <= state.crl_number:
            return False
        if delta.base_crl_number > state.crl_number:
            return False

        for entry in delta.entries:
            state.entries.setdefault(entry.serial, entry)
        state.deltas.append(delta)
        state.crl_number = delta.crl_number
        return True

    def export(self) -> List[Union[Crl, DeltaCrl]]:
        """Signed objects that reproduce this view when applied in order"""
        items: List[Union[Crl, DeltaCrl]] = []
        for issuer_id in sorted(self._issuers):
            state = self._issuers[issuer_id]
            if state.base is not None:
                items.append(state.base)
            items.extend(state.deltas)
        return items

    def merge(self, items: Iterable[Union[Crl, DeltaCrl]], anchors: Dict[str, Certificate]) -> bool:
        """
        Merge another party's exported view (CRL exchange)

        Args:
            items: Output of another view's export()
            anchors: issuer_id -> issuer certificate, for signature checks

        Returns:
            True if anything changed
        """
        changed = False
        for item in items:
            issuer = anchors.get(item.issuer_id)
            if issuer is None:
                continue
            if isinstance(item, DeltaCrl):
                changed |= self.apply_delta(item, issuer)
            else:
                changed |= self.apply_crl(item, issuer)
        return changed


def validate_certificate(
    cert: Certificate,
    trust_anchors: Iterable[Certificate],
    now: int,
    revocations: Optional[RevocationView] = None,
    chain_id: Optional[str] = None,
    minimum_class: Optional[CertificateClass] = None,
) -> ValidationResult:
    """
    Validate a certificate against trust anchors

    Checks run in a fixed order and the first failure wins: UnknownIssuer,
    BadSignature, Expired, Revoked, ProfileViolation.

    Args:
        cert: Certificate to check
        trust_anchors: Root certificates
        now: Current tick
        revocations: Validator's merged revocation view
        chain_id: Chain label the key is about to be used on
        minimum_class: Extra class floor (e.g. from operating rules)

    Returns:
        ValidationResult
    """
    anchors = {a.subject_id: a for a in trust_anchors}
    issuer = anchors.get(cert.issuer_id)
    if issuer is None:
        return ValidationResult(ValidationStatus.UNKNOWN_ISSUER, cert.issuer_id)

    if not verify(issuer.subject_public_key, cert.tbs_bytes(), cert.issuer_signature):
        return ValidationResult(ValidationStatus.BAD_SIGNATURE)

    if not cert.within_validity(now):
        return ValidationResult(ValidationStatus.EXPIRED)

    if revocations is not None and revocations.is_revoked(cert.issuer_id, cert.serial):
        return ValidationResult(ValidationStatus.REVOKED)

    profile = cert.profile
    if cert.cert_class < profile.minimum_class:
        return ValidationResult(ValidationStatus.PROFILE_VIOLATION, "class-below-profile")
    if minimum_class is not None and cert.cert_class < minimum_class:
        return ValidationResult(ValidationStatus.PROFILE_VIOLATION, "class-below-rules")
    if chain_id is not None and profile.permitted_chains and chain_id not in profile.permitted_chains:
        return ValidationResult(ValidationStatus.PROFILE_VIOLATION, f"chain:{chain_id}")

    return VALID
