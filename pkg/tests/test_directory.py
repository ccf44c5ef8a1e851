"""
Directory delta and revocation view tests
File: tests/test_directory.py
"""
import random

import pytest

from conftest import FULL_ATTRIBUTES, make_ca, make_keypair
from networks.directory import (
    DirectoryDelta,
    DirectoryEntry,
    DirectoryPublisher,
    DirectorySnapshot,
    DirectoryView,
    ResyncRequired,
    apply_delta,
    diff,
)
from pki.certificate_authority import Validity
from pki.certificates import CUSTOMER_PROFILE, CertificateClass, RevocationReason, RevocationView
from pki.crypto_core import digest
from utils.errors import InvalidDelta


def _entry(index: int, issuer: str = "ca1") -> DirectoryEntry:
    return DirectoryEntry(f"{index:032x}", bytes(digest(index.to_bytes(4, 'big'))), issuer)


POOL = [_entry(i) for i in range(30)]


def test_delta_must_advance_by_one():
    with pytest.raises(InvalidDelta):
        DirectoryDelta("v1", 3, 5)
    with pytest.raises(InvalidDelta):
        DirectoryDelta("v1", 0, 1, added=frozenset({POOL[0]}), removed=frozenset({POOL[0]}))


def test_apply_delta_version_gap():
    snapshot = DirectorySnapshot("v1", 2, frozenset(POOL[:3]))
    assert apply_delta(snapshot, DirectoryDelta("v1", 4, 5)) == ResyncRequired("v1", 2, 4)
    assert isinstance(apply_delta(snapshot, DirectoryDelta("v2", 2, 3)), ResyncRequired)


def test_diff_then_apply():
    old = DirectorySnapshot("v1", 1, frozenset(POOL[:5]))
    new = DirectorySnapshot("v1", 2, frozenset(POOL[3:8]))
    delta = diff(old, new)
    assert delta.added == frozenset(POOL[5:8])
    assert delta.removed == frozenset(POOL[:3])
    assert apply_delta(old, delta) == new


def test_unchanged_publish_still_bumps_version():
    publisher = DirectoryPublisher("v1")
    publisher.publish(POOL[:2])
    snapshot, delta = publisher.publish(POOL[:2])
    assert snapshot.version == 2
    assert delta.is_empty


@pytest.mark.parametrize("seed", range(100))
def test_random_delta_sequences_match_full_recompute(seed):
    rng = random.Random(seed)
    publisher = DirectoryPublisher("v1")
    view = DirectoryView()
    lagging = DirectoryView()
    current = set()

    for _ in range(rng.randint(1, 25)):
        for entry in rng.sample(POOL, rng.randint(0, 4)):
            current ^= {entry}
        snapshot, delta = publisher.publish(current)
        assert view.apply_delta(delta) == snapshot

        # a member that misses deltas must resync from a full snapshot
        if rng.random() < 0.3:
            result = lagging.apply_delta(delta)
            if isinstance(result, ResyncRequired):
                assert lagging.install_snapshot(publisher.latest)

    assert view.snapshot_of("v1") == publisher.latest
    assert view.snapshot_of("v1").entries == frozenset(current)
    if lagging.version_of("v1") == publisher.latest.version:
        assert lagging.snapshot_of("v1") == publisher.latest


def test_install_snapshot_only_newer():
    view = DirectoryView()
    assert view.install_snapshot(DirectorySnapshot("v1", 2, frozenset(POOL[:2]), b"sig"))
    assert not view.install_snapshot(DirectorySnapshot("v1", 2, frozenset(POOL[:3])))
    assert view.snapshot_of("v1").signature == b""
    assert view.version_of("v1") == 2


def test_view_find_and_drop():
    view = DirectoryView()
    view.install_snapshot(DirectorySnapshot("v2", 1, frozenset(POOL[:3])))
    view.install_snapshot(DirectorySnapshot("v1", 1, frozenset(POOL[2:4])))
    assert [owner for owner, _ in view.find(POOL[2].public_key_hash)] == ["v1", "v2"]
    assert view.find(POOL[2].public_key_hash, owners=["v2"]) == [("v2", POOL[2])]
    assert view.key_hashes(["v1"]) == {POOL[2].public_key_hash, POOL[3].public_key_hash}

    assert view.drop_entry("v2", POOL[2].certificate_serial)
    assert not view.drop_entry("v2", POOL[2].certificate_serial)
    assert [owner for owner, _ in view.find(POOL[2].public_key_hash)] == ["v1"]
    assert view.version_of("v2") == 1


def test_purge_revoked():
    ca = make_ca()
    keys = [make_keypair("purge", str(i)) for i in range(3)]
    certs = []
    for i, key in enumerate(keys):
        registration = ca.register_subject(f"s{i}", FULL_ATTRIBUTES, CertificateClass.CLASS1)
        certs.append(ca.issue_certificate(registration, key.public_key, CUSTOMER_PROFILE, Validity(0, 100)))
    entries = frozenset(DirectoryEntry(c.serial, bytes(c.public_key_hash), "ca1") for c in certs)

    view = DirectoryView()
    view.install_snapshot(DirectorySnapshot("v1", 1, entries))
    ca.revoke(certs[1].serial, RevocationReason.KEY_COMPROMISE, 1)
    revocations = RevocationView()
    revocations.apply_crl(ca.generate_crl(1), ca.root)

    assert view.purge_revoked(revocations) == 1
    assert certs[1].serial not in {e.certificate_serial for e in view.snapshot_of("v1").entries}


@pytest.mark.parametrize("seed", range(100))
def test_random_crl_sequences_match_full_recompute(seed):
    rng = random.Random(seed)
    ca = make_ca()
    serials = []
    for i in range(6):
        registration = ca.register_subject(f"s{i}", FULL_ATTRIBUTES, CertificateClass.CLASS1)
        key = make_keypair("crl-subject", str(i))
        serials.append(ca.issue_certificate(registration, key.public_key, CUSTOMER_PROFILE, Validity(0, 100)).serial)

    via_deltas = RevocationView()
    base = ca.generate_crl(0)
    via_deltas.apply_crl(base, ca.root)

    for now in range(1, rng.randint(2, 12)):
        for serial in rng.sample(serials, rng.randint(0, 2)):
            if serial not in ca.revocations:
                ca.revoke(serial, rng.choice(list(RevocationReason)), now)
        if rng.random() < 0.25:
            base = ca.generate_crl(now)
            assert via_deltas.apply_crl(base, ca.root)
        else:
            assert via_deltas.apply_delta(ca.generate_delta_crl(base.crl_number, now), ca.root)

    final = ca.generate_delta_crl(base.crl_number, 99)
    via_deltas.apply_delta(final, ca.root)
    full = RevocationView()
    full.apply_crl(ca.generate_crl(100), ca.root)

    assert via_deltas.revoked_serials().get("ca1", frozenset()) == full.revoked_serials()["ca1"]
    assert via_deltas.entries("ca1") == full.entries("ca1")

    # another member merging the exported view lands on the same set
    merged = RevocationView()
    merged.merge(via_deltas.export(), {"ca1": ca.root})
    assert merged.entries("ca1") == full.entries("ca1")


def test_revocation_view_rejects_stale_and_unverified():
    ca = make_ca()
    other = make_ca("ca2")
    first = ca.generate_crl(1)
    second = ca.generate_crl(2)
    view = RevocationView()
    assert not view.apply_crl(first, other.root)
    assert view.apply_crl(second, ca.root)
    assert not view.apply_crl(first, ca.root)
    assert view.crl_number("ca1") == 2

    # a delta whose base is newer than the view cannot be applied
    fresh = RevocationView()
    assert not fresh.apply_delta(ca.generate_delta_crl(2, 3), ca.root)
