"""
Registration, issuance, revocation and validation tests
File: tests/test_certificate_authority.py
"""
import random
from dataclasses import replace

import pytest

from conftest import FULL_ATTRIBUTES, certify_vasp, make_ca, make_keypair
from pki.certificate_authority import Validity
from pki.certificates import (
    CUSTOMER_PROFILE,
    VASP_PROFILE,
    Certificate,
    CertificateClass,
    CertificateProfile,
    CertStatus,
    RevocationReason,
    RevocationView,
    ValidationStatus,
    apply_delta_crl,
    validate_certificate,
)
from utils.errors import (
    AlreadyRevoked,
    ClassTooLow,
    InvalidValidity,
    KeyAlreadyBound,
    RegistrationRejected,
    UnknownBase,
    UnknownSerial,
)

VALIDITY = Validity(0, 1000)


def _issue(ca, subject_id, keypair, requested=CertificateClass.CLASS2, profile=CUSTOMER_PROFILE, attrs=None):
    registration = ca.register_subject(subject_id, attrs or FULL_ATTRIBUTES, requested)
    return ca.issue_certificate(registration, keypair.public_key, profile, VALIDITY)


def test_root_is_self_signed_and_deterministic():
    first, second = make_ca(), make_ca()
    assert first.root == second.root
    assert first.root.is_self_signed
    assert not certify_vasp(first, "v1", make_keypair("v1")).is_self_signed
    assert validate_certificate(first.root, [first.root], 5).ok


@pytest.mark.parametrize("attrs,requested,expected", [
    ({"name": "a", "email": "a@x"}, CertificateClass.CLASS3, CertificateClass.CLASS1),
    (FULL_ATTRIBUTES, CertificateClass.CLASS2, CertificateClass.CLASS2),
    (FULL_ATTRIBUTES, CertificateClass.CLASS1, CertificateClass.CLASS1),
    (dict(FULL_ATTRIBUTES, organization_vetting_ref="vet-1"), CertificateClass.CLASS3, CertificateClass.CLASS3),
    (dict(FULL_ATTRIBUTES, address="  "), CertificateClass.CLASS2, CertificateClass.CLASS1),
])
def test_class_assignment(ca, attrs, requested, expected):
    assert ca.register_subject("s", attrs, requested).assigned_class is expected


@pytest.mark.parametrize("attrs", [{}, {"name": "only name"}])
def test_registration_rejected(ca, attrs):
    with pytest.raises(RegistrationRejected):
        ca.register_subject("s", attrs, CertificateClass.CLASS1)


def test_issued_certificate_verifies(ca, subject_key):
    cert = _issue(ca, "alice", subject_key)
    assert cert.issuer_id == "ca1"
    assert cert.cert_class is CertificateClass.CLASS2
    assert cert.subject_public_key == subject_key.public_key
    assert Certificate.from_bytes(cert.to_bytes()) == cert
    assert validate_certificate(cert, [ca.root], 10).ok


def test_class_too_low_for_vasp_profile(ca, subject_key):
    with pytest.raises(ClassTooLow):
        _issue(ca, "v1", subject_key, profile=VASP_PROFILE)


def test_key_already_bound(ca, subject_key):
    _issue(ca, "alice", subject_key)
    with pytest.raises(KeyAlreadyBound):
        _issue(ca, "bob", subject_key)
    # the same subject may renew with the same key
    assert _issue(ca, "alice", subject_key).subject_id == "alice"


def test_key_rebinds_after_revocation(ca, subject_key):
    first = _issue(ca, "alice", subject_key)
    ca.revoke(first.serial, RevocationReason.KEY_COMPROMISE, 3)
    assert _issue(ca, "bob", subject_key).subject_id == "bob"


@pytest.mark.parametrize("window", [Validity(10, 10), Validity(10, 5)])
def test_invalid_validity(ca, subject_key, window):
    registration = ca.register_subject("alice", FULL_ATTRIBUTES, CertificateClass.CLASS1)
    with pytest.raises(InvalidValidity):
        ca.issue_certificate(registration, subject_key.public_key, CUSTOMER_PROFILE, window)


def test_validation_statuses(ca, subject_key):
    cert = _issue(ca, "alice", subject_key)
    other = make_ca("ca2")

    assert validate_certificate(cert, [other.root], 10).status is ValidationStatus.UNKNOWN_ISSUER
    forged = replace(cert, subject_id="mallory")
    assert validate_certificate(forged, [ca.root], 10).status is ValidationStatus.BAD_SIGNATURE
    assert validate_certificate(cert, [ca.root], 1000).ok
    assert validate_certificate(cert, [ca.root], 1001).status is ValidationStatus.EXPIRED

    ca.revoke(cert.serial, RevocationReason.CESSATION_OF_OPERATION, 20)
    view = RevocationView()
    view.apply_crl(ca.generate_crl(20), ca.root)
    assert validate_certificate(cert, [ca.root], 30, view).status is ValidationStatus.REVOKED
    assert ca.validate_certificate(cert, 30).status is ValidationStatus.REVOKED


def test_expiry_checked_before_revocation(ca, subject_key):
    cert = _issue(ca, "alice", subject_key)
    ca.revoke(cert.serial, RevocationReason.KEY_COMPROMISE, 1)
    view = RevocationView()
    view.apply_crl(ca.generate_crl(1))
    assert validate_certificate(cert, [ca.root], 5000, view).status is ValidationStatus.EXPIRED


def test_profile_violations(ca, subject_key):
    profile = CertificateProfile("customer", permitted_chains=frozenset({"simchain"}))
    cert = _issue(ca, "alice", subject_key, profile=profile)
    assert validate_certificate(cert, [ca.root], 1, chain_id="simchain").ok
    result = validate_certificate(cert, [ca.root], 1, chain_id="otherchain")
    assert result.status is ValidationStatus.PROFILE_VIOLATION
    assert str(result) == "ProfileViolation(chain:otherchain)"
    floor = validate_certificate(cert, [ca.root], 1, minimum_class=CertificateClass.CLASS3)
    assert floor.status is ValidationStatus.PROFILE_VIOLATION


def test_profile_usage_is_signature_only():
    with pytest.raises(ValueError):
        CertificateProfile("bad", permitted_usage=frozenset({"signature", "encryption"}))


def test_revoke_errors(ca, subject_key):
    cert = _issue(ca, "alice", subject_key)
    with pytest.raises(UnknownSerial):
        ca.revoke("00" * 16, RevocationReason.KEY_COMPROMISE, 1)
    ca.revoke(cert.serial, RevocationReason.KEY_COMPROMISE, 1)
    with pytest.raises(AlreadyRevoked):
        ca.revoke(cert.serial, RevocationReason.SUPERSEDED, 2)


def test_crl_numbers_shared_with_deltas(ca):
    keys = [make_keypair("crl", str(i)) for i in range(3)]
    certs = [_issue(ca, f"s{i}", key) for i, key in enumerate(keys)]

    ca.revoke(certs[0].serial, RevocationReason.KEY_COMPROMISE, 1)
    base = ca.generate_crl(1)
    assert base.crl_number == 1
    assert [e.serial for e in base.entries] == [certs[0].serial]

    ca.revoke(certs[1].serial, RevocationReason.SUPERSEDED, 2)
    delta = ca.generate_delta_crl(base.crl_number, 2)
    assert delta.crl_number == 2
    assert delta.base_crl_number == 1
    assert [e.serial for e in delta.entries] == [certs[1].serial]

    full = ca.generate_crl(3)
    assert full.crl_number == 3
    assert {e.serial for e in full.entries} == {certs[0].serial, certs[1].serial}

    with pytest.raises(UnknownBase):
        ca.generate_delta_crl(99, 4)


@pytest.mark.parametrize("seed", range(5))
def test_base_plus_delta_equals_full_crl(seed):
    rng = random.Random(seed)
    ca = make_ca(f"ca-{seed}")
    certs = [_issue(ca, f"s{i}", make_keypair("fold", str(seed), str(i))) for i in range(12)]
    serials = [c.serial for c in certs]
    rng.shuffle(serials)
    early, late = serials[:rng.randint(0, 5)], serials[6:6 + rng.randint(1, 6)]

    for serial in early:
        ca.revoke(serial, RevocationReason.KEY_COMPROMISE, 1)
    base = ca.generate_crl(1)
    for serial in late:
        ca.revoke(serial, RevocationReason.CESSATION_OF_OPERATION, 2)
    delta = ca.generate_delta_crl(base.crl_number, 2)

    folded = apply_delta_crl(base, delta)
    assert folded.entries == ca.generate_crl(3).entries
    assert folded.crl_number == delta.crl_number

    with pytest.raises(ValueError):
        apply_delta_crl(make_ca("other").generate_crl(1), delta)


def test_check_status_is_signed(ca, subject_key):
    cert = _issue(ca, "alice", subject_key)
    good = ca.check_status(cert.serial, 5)
    assert good.status is CertStatus.GOOD
    assert good.verify(ca.root)

    ca.revoke(cert.serial, RevocationReason.KEY_COMPROMISE, 6)
    revoked = ca.check_status(cert.serial, 7)
    assert revoked.status is CertStatus.REVOKED
    assert revoked.reason is RevocationReason.KEY_COMPROMISE
    assert revoked.revoked_at == 6
    assert revoked.verify(ca.root)
    assert not replace(revoked, status=CertStatus.GOOD).verify(ca.root)

    unknown = ca.check_status("ff" * 16, 7)
    assert unknown.status is CertStatus.UNKNOWN
    assert unknown.verify(ca.root)


def test_lookup_by_key_discloses_limited_attributes(ca, subject_key):
    vasp_key = make_keypair("vasp", "v1")
    vasp_cert = certify_vasp(ca, "v1", vasp_key)
    attrs = dict(FULL_ATTRIBUTES, vasp_id="v1", account_id="acct-1")
    cert = _issue(ca, "alice", subject_key, attrs=attrs)

    found = ca.find_certificate_by_pubkey(subject_key.public_key, 5)
    assert found.certificate == cert
    assert found.home_vasp_certificate == vasp_cert
    assert not found.revoked
    assert "government_id" not in found.attributes
    assert found.attributes["account_id"] == "acct-1"

    by_hash = ca.find_certificate_by_key_hash(cert.public_key_hash, 5)
    assert by_hash.certificate == cert
    assert ca.find_certificate_by_pubkey(make_keypair("nobody").public_key) is None

    ca.revoke(cert.serial, RevocationReason.KEY_COMPROMISE, 6)
    assert ca.find_certificate_by_pubkey(subject_key.public_key, 7).revoked
