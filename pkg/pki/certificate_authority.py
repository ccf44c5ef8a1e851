"""
Certification authority: registration, issuance, revocation, CRLs, status, lookup
File: pki/certificate_authority.py
"""
import random
from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

from pki.certificates import (
    ROOT_PROFILE,
    Certificate,
    CertificateClass,
    CertificateProfile,
    CertificateStatusResponse,
    CertStatus,
    Crl,
    DeltaCrl,
    RevocationEntry,
    RevocationReason,
    validate_certificate,
    ValidationResult,
    ValidationStatus,
)
from pki.crypto_core import KeyPair, digest, sign
from utils.errors import (
    AlreadyRevoked,
    ClassTooLow,
    InvalidValidity,
    KeyAlreadyBound,
    RegistrationRejected,
    UnknownBase,
    UnknownSerial,
)
from utils.logging_utils import get_logger

# Attributes each class requires on top of the classes below it
DEFAULT_CLASS_TABLE: Dict[CertificateClass, Tuple[str, ...]] = {
    CertificateClass.CLASS1: ("name", "email"),
    CertificateClass.CLASS2: ("government_id", "address"),
    CertificateClass.CLASS3: ("organization_vetting_ref",),
}

# Attributes a CA shares when answering a lookup-by-public-key
DEFAULT_LOOKUP_DISCLOSURE: FrozenSet[str] = frozenset({
    "name", "account_id", "address", "vasp_id", "public_key_hash", "custody_model",
})


@dataclass(frozen=True)
class Validity:
    not_before: int
    not_after: int

    def check(self):
        if self.not_before >= self.not_after:
            raise InvalidValidity(f"not_before {self.not_before} >= not_after {self.not_after}")


@dataclass
class RegistrationRecord:
    subject_id: str
    submitted_attributes: Dict[str, str]
    assigned_class: CertificateClass
    verification_log: List[Tuple[str, bool]] = field(default_factory=list)
    timestamp: int = 0


@dataclass(frozen=True)
class LookupResult:
    """Answer to a lookup-by-public-key"""
    certificate: Certificate
    attributes: Dict[str, str]
    status: CertStatus
    home_vasp_certificate: Optional[Certificate] = None

    @property
    def revoked(self) -> bool:
        return self.status is CertStatus.REVOKED


def self_sign_root(ca_identity: str, keypair: KeyPair, validity: Validity) -> Certificate:
    """
    Create a self-signed root certificate

    Args:
        ca_identity: CA id, used as both issuer and subject
        keypair: CA key material
        validity: Validity window in ticks

    Returns:
        Root certificate whose signature verifies under its own key

    Raises:
        InvalidValidity: If the window is empty
    """
    validity.check()
    # root serials are deterministic so identical inputs give identical roots
    serial = digest(b"root:" + ca_identity.encode('utf-8') + keypair.public_key)[:16].hex()
    unsigned = Certificate(
        serial=serial,
        issuer_id=ca_identity,
        validity_not_before=validity.not_before,
        validity_not_after=validity.not_after,
        subject_id=ca_identity,
        subject_public_key=keypair.public_key,
        profile=ROOT_PROFILE,
        cert_class=CertificateClass.CLASS3,
    )
    return replace(unsigned, issuer_signature=sign(keypair.private_key, unsigned.tbs_bytes()))


class CertificateAuthority:
    """
    One CA instance: a single logical actor, operations are serialized

    State is a registration store, an issued-certificate store with a
    public-key binding index, the revocation list, and the history of CRL
    numbers with the revocation set each one covered.
    """

    def __init__(
        self,
        ca_id: str,
        keypair: KeyPair,
        rng: random.Random,
        root_validity: Validity = Validity(0, 1_000_000),
        class_table: Optional[Mapping[CertificateClass, Sequence[str]]] = None,
        lookup_disclosure: FrozenSet[str] = DEFAULT_LOOKUP_DISCLOSURE,
    ):
        """
        Initialize a CA and self-sign its root

        Args:
            ca_id: CA identity
            keypair: CA signing key material
            rng: Seeded PRNG for serial numbers
            root_validity: Validity window of the root certificate
            class_table: Class -> additional required attributes
            lookup_disclosure: Attributes returned with lookup answers
        """
        self.ca_id = ca_id
        self.keypair = keypair
        self.rng = rng
        self.class_table = {
            CertificateClass.parse(k): tuple(v)
            for k, v in (class_table or DEFAULT_CLASS_TABLE).items()
        }
        self.lookup_disclosure = frozenset(lookup_disclosure)
        self.root = self_sign_root(ca_id, keypair, root_validity)

        self.registrations: Dict[str, RegistrationRecord] = {}
        self.issued: Dict[str, Certificate] = {}
        self.subject_attributes: Dict[str, Dict[str, str]] = {}
        self.key_index: Dict[bytes, List[str]] = {}
        self.key_hash_index: Dict[bytes, bytes] = {}
        self.vasp_certificates: Dict[str, Certificate] = {}

        self.revocations: Dict[str, RevocationEntry] = {}
        self.crl_counter = 0
        self.crl_history: Dict[int, FrozenSet[str]] = {}
        self.last_full_crl: Optional[Crl] = None

        self._logger = get_logger("ca", actor=ca_id)

    # Registration and issuance

    def register_subject(
        self,
        subject_id: str,
        submitted_attributes: Mapping[str, str],
        requested_class: CertificateClass,
        now: int = 0,
    ) -> RegistrationRecord:
        """
        Registration step: verify attributes and assign a class

        The assigned class is the highest class not above the requested one
        whose cumulative attribute set is fully present.

        Raises:
            RegistrationRejected: If even Class1 requirements fail
        """
        attributes = {k: str(v) for k, v in submitted_attributes.items()}
        if not attributes:
            raise RegistrationRejected("no attributes submitted")

        log: List[Tuple[str, bool]] = []
        assigned: Optional[CertificateClass] = None

        for level in sorted(self.class_table):
            if level > requested_class:
                break
            level_ok = True
            for name in self.class_table[level]:
                present = bool(attributes.get(name, "").strip())
                log.append((f"{level.label}.{name}", present))
                level_ok = level_ok and present
            if not level_ok:
                break
            assigned = level

        if assigned is None:
            missing = [check for check, ok in log if not ok]
            raise RegistrationRejected(f"missing mandatory attributes: {', '.join(missing)}")

        record = RegistrationRecord(
            subject_id=subject_id,
            submitted_attributes=attributes,
            assigned_class=assigned,
            verification_log=log,
            timestamp=now,
        )
        self.registrations[subject_id] = record
        return record

    def _fresh_serial(self) -> str:
        while True:
            serial = self.rng.getrandbits(128).to_bytes(16, 'big').hex()
            if serial not in self.issued and serial != self.root.serial:
                return serial

    def is_live(self, serial: str, now: int) -> bool:
        cert = self.issued.get(serial)
        return bool(cert and serial not in self.revocations and cert.within_validity(now))

    def issue_certificate(
        self,
        registration: RegistrationRecord,
        subject_public_key: bytes,
        profile: CertificateProfile,
        validity: Validity,
        now: int = 0,
    ) -> Certificate:
        """
        Certification step: bind the subject to its public key

        Raises:
            InvalidValidity: Empty validity window
            ClassTooLow: Registration class below the profile minimum
            KeyAlreadyBound: Key live for a different subject at this CA
        """
        validity.check()
        if profile.minimum_class > registration.assigned_class:
            raise ClassTooLow(
                f"{registration.assigned_class.label} < {profile.minimum_class.label} "
                f"required by profile {profile.profile_id}"
            )

        for serial in self.key_index.get(subject_public_key, []):
            other = self.issued[serial]
            if other.subject_id != registration.subject_id and self.is_live(serial, now):
                raise KeyAlreadyBound(f"key bound to {other.subject_id} by {serial}")

        unsigned = Certificate(
            serial=self._fresh_serial(),
            issuer_id=self.ca_id,
            validity_not_before=validity.not_before,
            validity_not_after=validity.not_after,
            subject_id=registration.subject_id,
            subject_public_key=subject_public_key,
            profile=profile,
            cert_class=registration.assigned_class,
        )
        cert = replace(unsigned, issuer_signature=sign(self.keypair.private_key, unsigned.tbs_bytes()))

        self.issued[cert.serial] = cert
        self.subject_attributes[cert.serial] = dict(registration.submitted_attributes)
        self.key_index.setdefault(subject_public_key, []).append(cert.serial)
        self.key_hash_index[bytes(digest(subject_public_key))] = subject_public_key
        if profile.profile_id == "vasp":
            self.vasp_certificates[registration.subject_id] = cert

        self._logger.debug("certificate issued", serial=cert.serial, subject=cert.subject_id)
        return cert

    def validate_certificate(self, cert: Certificate, now: int) -> ValidationResult:
        """Validate against this CA's root and its own revocation set"""
        result = validate_certificate(cert, [self.root], now)
        revoked = cert.issuer_id == self.ca_id and cert.serial in self.revocations
        if revoked and result.status in (ValidationStatus.VALID, ValidationStatus.PROFILE_VIOLATION):
            return ValidationResult(ValidationStatus.REVOKED)
        return result

    # Revocation

    def revoke(self, serial: str, reason: RevocationReason, now: int) -> RevocationEntry:
        """
        Revoke an issued certificate

        Raises:
            UnknownSerial: Serial not issued here
            AlreadyRevoked: Serial already revoked
        """
        if serial not in self.issued:
            raise UnknownSerial(serial)
        if serial in self.revocations:
            raise AlreadyRevoked(serial)

        entry = RevocationEntry(serial=serial, reason=RevocationReason(reason), revoked_at=now)
        self.revocations[serial] = entry
        self._logger.info("certificate revoked", serial=serial, reason=entry.reason.value)
        return entry

    def generate_crl(self, now: int) -> Crl:
        """Full CRL; crl numbers are shared with delta CRLs and strictly increase"""
        self.crl_counter += 1
        entries = tuple(sorted(self.revocations.values(), key=lambda e: e.serial))
        self.crl_history[self.crl_counter] = frozenset(self.revocations)
        unsigned = Crl(issuer_id=self.ca_id, crl_number=self.crl_counter, entries=entries, issued_at=now)
        crl = replace(unsigned, signature=sign(self.keypair.private_key, unsigned.tbs_bytes()))
        self.last_full_crl = crl
        return crl

    def generate_delta_crl(self, base_number: int, now: int) -> DeltaCrl:
        """
        Delta CRL with the revocations added since base_number

        Raises:
            UnknownBase: base_number was never issued
        """
        if base_number not in self.crl_history:
            raise UnknownBase(str(base_number))

        base_serials = self.crl_history[base_number]
        added = tuple(sorted(
            (e for s, e in self.revocations.items() if s not in base_serials),
            key=lambda e: e.serial,
        ))
        self.crl_counter += 1
        self.crl_history[self.crl_counter] = frozenset(self.revocations)
        unsigned = DeltaCrl(
            issuer_id=self.ca_id,
            crl_number=self.crl_counter,
            base_crl_number=base_number,
            entries=added,
            issued_at=now,
        )
        return replace(unsigned, signature=sign(self.keypair.private_key, unsigned.tbs_bytes()))

    # Status and lookup

    def check_status(self, serial: str, now: int) -> CertificateStatusResponse:
        """OCSP-style signed status; unknown serials still get a signed answer"""
        entry = self.revocations.get(serial)
        if serial not in self.issued:
            status, reason, revoked_at = CertStatus.UNKNOWN, None, None
        elif entry is not None and entry.revoked_at <= now:
            status, reason, revoked_at = CertStatus.REVOKED, entry.reason, entry.revoked_at
        else:
            status, reason, revoked_at = CertStatus.GOOD, None, None

        unsigned = CertificateStatusResponse(
            serial=serial,
            status=status,
            produced_at=now,
            responder_id=self.ca_id,
            reason=reason,
            revoked_at=revoked_at,
        )
        return replace(unsigned, responder_signature=sign(self.keypair.private_key, unsigned.tbs_bytes()))

    def find_certificate_by_pubkey(self, public_key: bytes, now: int = 0) -> Optional[LookupResult]:
        """
        Search the certificate database for a public key

        A live certificate wins; otherwise the most recently issued one is
        returned with its revoked (or expired-but-good) status, so the caller
        has evidence to deny.

        Args:
            public_key: 32-byte key
            now: Current tick

        Returns:
            LookupResult or None if the key was never certified here
        """
        serials = self.key_index.get(public_key)
        if not serials:
            return None

        live = [s for s in serials if self.is_live(s, now)]
        serial = live[-1] if live else serials[-1]
        cert = self.issued[serial]
        status = CertStatus.REVOKED if serial in self.revocations else CertStatus.GOOD

        attributes = {
            k: v for k, v in self.subject_attributes.get(serial, {}).items()
            if k in self.lookup_disclosure
        }
        home = self.vasp_certificates.get(attributes.get("vasp_id", ""))
        return LookupResult(certificate=cert, attributes=attributes, status=status, home_vasp_certificate=home)

    def find_certificate_by_key_hash(self, key_hash: bytes, now: int = 0) -> Optional[LookupResult]:
        """Lookup variant for callers that hold only the public-key hash"""
        public_key = self.key_hash_index.get(bytes(key_hash))
        if public_key is None:
            return None
        return self.find_certificate_by_pubkey(public_key, now)
