"""
VASP-signed customer attribute assertions linked to certificates
File: pki/assertion_service.py
"""
import random
from dataclasses import dataclass, replace
from typing import Callable, Dict, FrozenSet, Iterable, List, Mapping

from pki.certificates import Certificate, ValidationResult
from pki.crypto_core import (
    Hash32,
    KeyPair,
    canonical_encode,
    encode_mapping,
    sign,
    text,
    u64,
    verify,
)
from utils.errors import EmptyDisclosure, SubjectCertInvalid, UnknownAttribute

# Stable identity data only; amount and date travel in the transfer notice
TRAVEL_RULE_ATTRIBUTES: FrozenSet[str] = frozenset({
    "name", "account_id", "address", "vasp_id", "public_key_hash", "custody_model",
})


@dataclass(frozen=True)
class DisclosurePolicy:
    allowed_attributes: FrozenSet[str] = TRAVEL_RULE_ATTRIBUTES

    def __post_init__(self):
        if not self.allowed_attributes:
            raise ValueError("disclosure policy must allow at least one attribute")
        object.__setattr__(self, 'allowed_attributes', frozenset(self.allowed_attributes))


TRAVEL_RULE_POLICY = DisclosurePolicy()


@dataclass(frozen=True)
class AttributeAssertion:
    assertion_id: bytes
    issuer_vasp_id: str
    subject_id: str
    linked_certificate_hash: Hash32
    attributes: Dict[str, str]
    issued_at: int
    vasp_signature: bytes = b""

    def tbs_bytes(self) -> bytes:
        return canonical_encode([
            (1, self.assertion_id),
            (2, text(self.issuer_vasp_id)),
            (3, text(self.subject_id)),
            (4, bytes(self.linked_certificate_hash)),
            (5, encode_mapping(self.attributes)),
            (6, u64(self.issued_at)),
        ])

    def to_bytes(self) -> bytes:
        return canonical_encode([(1, self.tbs_bytes()), (2, self.vasp_signature)])

    def dump(self) -> List[str]:
        """Human-readable field=value lines"""
        lines = [
            f"assertion_id={self.assertion_id.hex()}",
            f"issuer_vasp_id={self.issuer_vasp_id}",
            f"subject_id={self.subject_id}",
            f"linked_certificate_hash={bytes(self.linked_certificate_hash).hex()}",
        ]
        lines.extend(f"attribute.{name}={self.attributes[name]}" for name in sorted(self.attributes))
        lines.append(f"issued_at={self.issued_at}")
        lines.append(f"vasp_signature={self.vasp_signature.hex()}")
        return lines


Validator = Callable[[Certificate], ValidationResult]


class AssertionService:
    """
    Issues, verifies and filters assertions on behalf of one VASP

    Args:
        vasp_id: Issuing VASP identity
        keypair: VASP signing key (the key certified in its VASP certificate)
        rng: Seeded PRNG for assertion ids
        validator: Callable validating a certificate at the current tick
    """

    def __init__(self, vasp_id: str, keypair: KeyPair, rng: random.Random, validator: Validator):
        self.vasp_id = vasp_id
        self.keypair = keypair
        self.rng = rng
        self.validator = validator

    def _new_id(self) -> bytes:
        return self.rng.getrandbits(128).to_bytes(16, 'big')

    def _signed(self, unsigned: AttributeAssertion) -> AttributeAssertion:
        return replace(unsigned, vasp_signature=sign(self.keypair.private_key, unsigned.tbs_bytes()))

    def issue_assertion(
        self,
        subject_id: str,
        registered_attributes: Mapping[str, str],
        subject_certificate: Certificate,
        attributes: Iterable[str],
        now: int,
    ) -> AttributeAssertion:
        """
        Sign a bundle of the subject's registered attributes

        Args:
            subject_id: Account or customer the assertion is about
            registered_attributes: Everything the VASP holds for the account
            subject_certificate: Certificate the assertion links to
            attributes: Names to include (must be registered)
            now: Current tick

        Returns:
            Signed assertion

        Raises:
            SubjectCertInvalid: If the subject certificate does not validate
            UnknownAttribute: If a requested attribute is not registered
        """
        result = self.validator(subject_certificate)
        if not result.ok:
            raise SubjectCertInvalid(f"{subject_certificate.serial}: {result}")

        attributes = list(attributes)
        unknown = sorted(set(attributes) - set(registered_attributes))
        if unknown:
            raise UnknownAttribute(f"{subject_id}: not registered: {', '.join(unknown)}")
        chosen = {name: str(registered_attributes[name]) for name in attributes}
        return self._signed(AttributeAssertion(
            assertion_id=self._new_id(),
            issuer_vasp_id=self.vasp_id,
            subject_id=subject_id,
            linked_certificate_hash=subject_certificate.fingerprint,
            attributes=chosen,
            issued_at=now,
        ))

    def filter_attributes(
        self, assertion: AttributeAssertion, policy: DisclosurePolicy, now: int
    ) -> AttributeAssertion:
        """
        Re-issue an assertion restricted to the policy's attributes

        The new assertion is signed by this (disclosing) VASP; the original
        object is left untouched.

        Raises:
            EmptyDisclosure: If no attribute survives the policy
        """
        kept = {k: v for k, v in assertion.attributes.items() if k in policy.allowed_attributes}
        if not kept:
            raise EmptyDisclosure(f"policy leaves nothing of assertion {assertion.assertion_id.hex()}")

        return self._signed(AttributeAssertion(
            assertion_id=self._new_id(),
            issuer_vasp_id=self.vasp_id,
            subject_id=assertion.subject_id,
            linked_certificate_hash=assertion.linked_certificate_hash,
            attributes=kept,
            issued_at=now,
        ))


def verify_assertion(
    assertion: AttributeAssertion,
    issuer_vasp_certificate: Certificate,
    subject_certificate: Certificate,
    validator: Validator,
) -> bool:
    """
    Check signature, certificate link and issuer certificate validity

    Args:
        assertion: Assertion to check
        issuer_vasp_certificate: Certificate of the signing VASP
        subject_certificate: Certificate the assertion claims to link to
        validator: Validates the issuer certificate at the current tick

    Returns:
        True iff all three checks pass
    """
    if issuer_vasp_certificate.subject_id != assertion.issuer_vasp_id:
        return False
    if not verify(issuer_vasp_certificate.subject_public_key, assertion.tbs_bytes(), assertion.vasp_signature):
        return False
    if bytes(assertion.linked_certificate_hash) != bytes(subject_certificate.fingerprint):
        return False
    return validator(issuer_vasp_certificate).ok
