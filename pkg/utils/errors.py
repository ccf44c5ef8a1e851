"""
Exception hierarchy shared by every package
File: utils/errors.py
"""
from typing import Optional


class TravelRuleError(Exception):
    """Base class for all protocol errors raised by this repo"""


# crypto_core

class InvalidSeed(TravelRuleError):
    """Keypair seed is not exactly 32 bytes"""


class NonCanonicalOrder(TravelRuleError):
    """Canonical record field tags are not strictly increasing"""


class MalformedRecord(TravelRuleError):
    """Bytes do not decode as a canonical record"""


# certificate_authority

class InvalidValidity(TravelRuleError):
    """Validity window has not_before >= not_after"""


class RegistrationRejected(TravelRuleError):
    """Submitted attributes do not satisfy even the lowest certificate class"""


class KeyAlreadyBound(TravelRuleError):
    """Public key is already bound to a different live subject at this CA"""


class ClassTooLow(TravelRuleError):
    """Registration class is below the profile's minimum class"""


class UnknownSerial(TravelRuleError):
    """Serial was never issued by this CA"""


class AlreadyRevoked(TravelRuleError):
    """Serial already has a revocation entry"""


class UnknownBase(TravelRuleError):
    """Delta CRL requested against a CRL number that was never issued"""


# assertion_service

class SubjectCertInvalid(TravelRuleError):
    """Subject certificate does not validate, so no assertion can be issued"""


class EmptyDisclosure(TravelRuleError):
    """Disclosure policy leaves no attribute to share"""


class UnknownAttribute(TravelRuleError):
    """Requested attribute is not registered for the subject"""


# vasp_node

class ModelKeyMismatch(TravelRuleError):
    """Key material supplied for an account contradicts its custody model"""


class NoCustomerKey(TravelRuleError):
    """Account has no customer public key to certify"""


class KeyUnavailable(TravelRuleError):
    """The model-appropriate signing key cannot be reached"""


class MixedDestination(TravelRuleError):
    """A commingled batch targets more than one Beneficiary-VASP"""


class InvalidTransition(TravelRuleError):
    """Travel-rule record status change outside the allowed lifecycle"""


# trust_network

class RulesVersionMismatch(TravelRuleError):
    """Joining VASP acknowledged an outdated operating-rules version"""


class MembershipDenied(TravelRuleError):
    """Joining VASP's certificate does not validate"""


class InvalidDelta(TravelRuleError):
    """Directory delta violates its construction invariants"""


# simulation

class SchemaError(TravelRuleError):
    """Scenario file does not match the documented schema"""

    def __init__(self, message: str, reference: Optional[str] = None):
        super().__init__(message)
        self.reference = reference
