"""
PKI package - keys, canonical encoding, certificates, CA services, assertions
File: pki/__init__.py
"""

from .crypto_core import KeyPair, generate_keypair, sign, verify, digest, canonical_encode, canonical_decode
from .certificates import Certificate, CertificateClass, CertificateProfile, RevocationView, validate_certificate
from .certificate_authority import CertificateAuthority, Validity, self_sign_root
from .assertion_service import AssertionService, AttributeAssertion, DisclosurePolicy, verify_assertion

__all__ = [
    'KeyPair',
    'generate_keypair',
    'sign',
    'verify',
    'digest',
    'canonical_encode',
    'canonical_decode',
    'Certificate',
    'CertificateClass',
    'CertificateProfile',
    'RevocationView',
    'validate_certificate',
    'CertificateAuthority',
    'Validity',
    'self_sign_root',
    'AssertionService',
    'AttributeAssertion',
    'DisclosurePolicy',
    'verify_assertion',
]
