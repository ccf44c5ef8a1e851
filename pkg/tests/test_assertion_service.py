"""
Attribute assertion tests
File: tests/test_assertion_service.py
"""
from dataclasses import replace

import pytest

from conftest import FULL_ATTRIBUTES, certify_vasp, make_keypair
from pki.assertion_service import AssertionService, DisclosurePolicy, verify_assertion
from pki.certificate_authority import Validity
from pki.certificates import CUSTOMER_PROFILE, CertificateClass, RevocationReason
from utils.errors import EmptyDisclosure, SubjectCertInvalid, TravelRuleError, UnknownAttribute
from utils.id_utils import derive_rng

NOW = 10
REGISTERED = dict(FULL_ATTRIBUTES, account_id="acct-1", vasp_id="v1")


@pytest.fixture
def world(ca, subject_key):
    vasp_key = make_keypair("vasp", "v1")
    vasp_cert = certify_vasp(ca, "v1", vasp_key)
    registration = ca.register_subject("acct-1", REGISTERED, CertificateClass.CLASS2)
    subject_cert = ca.issue_certificate(registration, subject_key.public_key, CUSTOMER_PROFILE, Validity(0, 1000))

    def validator(cert):
        return ca.validate_certificate(cert, NOW)

    service = AssertionService("v1", vasp_key, derive_rng(1, "assertions"), validator)
    return ca, service, vasp_cert, subject_cert, validator


def test_issue_and_verify(world):
    _, service, vasp_cert, subject_cert, validator = world
    assertion = service.issue_assertion("acct-1", REGISTERED, subject_cert, ["name", "account_id"], NOW)
    assert assertion.attributes == {"name": "Alice Example", "account_id": "acct-1"}
    assert assertion.linked_certificate_hash == subject_cert.fingerprint
    assert verify_assertion(assertion, vasp_cert, subject_cert, validator)


def test_verify_rejects_tampered_attributes(world):
    _, service, vasp_cert, subject_cert, validator = world
    assertion = service.issue_assertion("acct-1", REGISTERED, subject_cert, ["name"], NOW)
    forged = replace(assertion, attributes={"name": "Mallory"})
    assert not verify_assertion(forged, vasp_cert, subject_cert, validator)


def test_verify_rejects_wrong_subject_certificate(world, ca):
    _, service, vasp_cert, subject_cert, validator = world
    other_key = make_keypair("other")
    registration = ca.register_subject("acct-2", REGISTERED, CertificateClass.CLASS1)
    other_cert = ca.issue_certificate(registration, other_key.public_key, CUSTOMER_PROFILE, Validity(0, 1000))
    assertion = service.issue_assertion("acct-1", REGISTERED, subject_cert, ["name"], NOW)
    assert not verify_assertion(assertion, vasp_cert, other_cert, validator)


def test_verify_rejects_revoked_issuer(world):
    ca, service, vasp_cert, subject_cert, validator = world
    assertion = service.issue_assertion("acct-1", REGISTERED, subject_cert, ["name"], NOW)
    ca.revoke(vasp_cert.serial, RevocationReason.CESSATION_OF_OPERATION, NOW)
    assert not verify_assertion(assertion, vasp_cert, subject_cert, validator)


def test_issue_refuses_invalid_subject_certificate(world):
    ca, service, _, subject_cert, _ = world
    ca.revoke(subject_cert.serial, RevocationReason.KEY_COMPROMISE, NOW)
    with pytest.raises(SubjectCertInvalid):
        service.issue_assertion("acct-1", REGISTERED, subject_cert, ["name"], NOW)


def test_issue_requires_registered_attributes(world):
    _, service, _, subject_cert, _ = world
    with pytest.raises(UnknownAttribute, match="custody_model"):
        service.issue_assertion("acct-1", REGISTERED, subject_cert, ["name", "custody_model"], NOW)
    with pytest.raises(TravelRuleError):
        service.issue_assertion("acct-1", REGISTERED, subject_cert, ["nickname"], NOW)


def test_filter_keeps_only_allowed_and_resigns(world):
    _, service, vasp_cert, subject_cert, validator = world
    full = service.issue_assertion("acct-1", REGISTERED, subject_cert, ["name", "email", "government_id"], NOW)
    filtered = service.filter_attributes(full, DisclosurePolicy(frozenset({"name", "address"})), NOW + 1)

    assert filtered.attributes == {"name": "Alice Example"}
    assert filtered.assertion_id != full.assertion_id
    assert filtered.issued_at == NOW + 1
    assert "email" in full.attributes
    assert verify_assertion(filtered, vasp_cert, subject_cert, validator)


def test_filter_rejects_empty_result(world):
    _, service, _, subject_cert, _ = world
    full = service.issue_assertion("acct-1", REGISTERED, subject_cert, ["email"], NOW)
    with pytest.raises(EmptyDisclosure):
        service.filter_attributes(full, DisclosurePolicy(frozenset({"name"})), NOW)


def test_empty_policy_is_rejected():
    with pytest.raises(ValueError):
        DisclosurePolicy(frozenset())


def test_dump_lists_sorted_attributes(world):
    _, service, _, subject_cert, _ = world
    lines = service.issue_assertion("acct-1", REGISTERED, subject_cert, ["name", "address"], NOW).dump()
    attribute_lines = [line for line in lines if line.startswith("attribute.")]
    assert attribute_lines == ["attribute.address=1 Example Street", "attribute.name=Alice Example"]
