"""
VASP behaviour inside small scripted worlds
File: tests/test_vasp_node.py
"""
import pytest

from conftest import customer, single_network
from simulation.harness import run_scenario
from simulation.scenario import parse_scenario
from utils.errors import KeyUnavailable
from vasps.accounts import CustodyModel
from vasps.records import RecordStatus, Role


def _transfer(tick, origin, target, form="key", **extra):
    action = {"action": "transfer", "tick": tick, "origin": origin,
              "target": {"customer": target, "form": form}, "amount": 25}
    action.update(extra)
    return action


def _records(node, role):
    return [r for r in node.records if r.role is role]


def test_key_custody_and_commingled_beneficiaries():
    people = [
        customer("alice", "v1"),
        customer("bob", "v2", custody="KeyCustody"),
        customer("carol", "v2", custody="Commingled"),
    ]
    script = [_transfer(20, "alice", "bob"), _transfer(21, "alice", "carol", form="account")]
    result = run_scenario(parse_scenario(single_network(people, script)))
    assert result.ok, result.breaches
    assert [t.label for t in result.transfers] == ["Broadcast", "Broadcast"]
    assert result.metrics.audit_violations == 0

    v2 = result.nodes["v2"]
    bob, carol = v2.accounts["bob"], v2.accounts["carol"]
    assert bob.custody_model is CustodyModel.KEY_CUSTODY
    assert bob.custodied_private_key is not None
    assert carol.customer_public_key is None

    destinations = {tx.to_public_key for tx, _ in result.ledger.confirmed_transactions()}
    assert destinations == {bob.customer_public_key, v2.keypair.public_key}

    acks = {r.ack.beneficiary_assertion.attributes["account_id"]: r.ack for r in _records(v2, Role.BENEFICIARY_SIDE)}
    assert acks["bob"].beneficiary_evidences[0].operator.operator_vasp_id == "v2"
    assert acks["carol"].beneficiary_assertion.attributes["custody_model"] == "Commingled"


def test_beneficiary_side_screening_rejects_the_notice():
    people = [customer("alice", "v1"), customer("mallory", "v2")]
    document = single_network(people, [_transfer(20, "alice", "mallory")])
    document["suspects"] = [{"entry": "mallory", "vasps": ["v2"]}]
    result = run_scenario(parse_scenario(document))

    assert [t.label for t in result.transfers] == ["AckRejected(SuspectParty)"]
    assert not result.ledger.confirmed_transactions()
    record = _records(result.nodes["v1"], Role.ORIGINATOR_SIDE)[0]
    assert record.status is RecordStatus.FAILED
    assert record.failure_reason == "AckRejected(SuspectParty)"
    assert not _records(result.nodes["v2"], Role.BENEFICIARY_SIDE)
    assert result.ok, result.breaches


def test_unsupported_asset_is_refused():
    people = [customer("alice", "v1"), customer("bob", "v2")]
    document = single_network(people, [_transfer(20, "alice", "bob", asset_type="XYZ")])
    document["vasps"][1]["supported_assets"] = ["VA"]
    result = run_scenario(parse_scenario(document))
    assert [t.label for t in result.transfers] == ["AckRejected(PolicyRefusal)"]
    assert not result.ledger.confirmed_transactions()


def test_lost_channel_times_out_without_broadcast():
    people = [customer("alice", "v1"), customer("bob", "v2")]
    script = [
        {"action": "drop_link", "tick": 19, "endpoint_a": "v1", "endpoint_b": "v2", "duration": 40},
        _transfer(20, "alice", "bob"),
    ]
    result = run_scenario(parse_scenario(single_network(people, script)))
    assert [t.label for t in result.transfers] == ["ChannelTimeout"]
    assert not result.log.of_kind("tx_submitted")
    record = _records(result.nodes["v1"], Role.ORIGINATOR_SIDE)[0]
    assert record.failure_reason == "ChannelTimeout"
    assert result.metrics.conservation_holds()


def test_tampered_execution_is_caught():
    people = [customer("alice", "v1"), customer("bob", "v2")]
    script = [{"action": "tamper_execution", "tick": 19, "vasp": "v1"}, _transfer(20, "alice", "bob")]
    result = run_scenario(parse_scenario(single_network(people, script)))

    record = _records(result.nodes["v1"], Role.ORIGINATOR_SIDE)[0]
    assert record.status is RecordStatus.FAILED
    assert record.failure_reason == "BindingMismatch"
    assert any("broadcast against binding" in breach for breach in result.breaches)
    beneficiary = _records(result.nodes["v2"], Role.BENEFICIARY_SIDE)[0]
    assert beneficiary.status_label() == "Failed(BindingMismatch)"
    assert beneficiary.chain_tx_id == record.chain_tx_id != record.binding
    assert [e.actor for e in result.log.of_kind("record_failed")] == ["v1", "v2"]
    assert result.metrics.unconfirmed_records == 0
    assert result.metrics.reconciliation_orphans == 2


def test_unannounced_inbound_transfer_is_returned():
    people = [customer("alice", "v1"), customer("bob", "v2", custody="KeyCustody")]
    document = single_network(people, [
        {"action": "p2p_transfer", "tick": 5, "sender": "w1", "recipient": "bob", "amount": 7},
    ])
    document["wallets"] = ["w1"]
    result = run_scenario(parse_scenario(document))

    v2 = result.nodes["v2"]
    report = v2.reconcile()
    assert len(report.orphan_chain_txs) == 1
    orphan = bytes.fromhex(report.orphan_chain_txs[0])

    returned = v2.return_transfer(orphan)
    assert v2.returns == {returned: orphan}
    assert v2.reconcile().orphan_chain_txs == ()
    assert len(result.log.of_kind("return_submitted")) == 1
    with pytest.raises(ValueError):
        v2.return_transfer(orphan)

    # only confirmed transactions can be returned
    with pytest.raises(ValueError):
        result.nodes["v1"].return_transfer(b"\x00" * 32)


def test_return_needs_an_operated_key():
    people = [customer("alice", "v1"), customer("bob", "v2")]
    document = single_network(people, [
        {"action": "p2p_transfer", "tick": 5, "sender": "w1", "recipient": "bob", "amount": 7},
    ])
    document["wallets"] = ["w1"]
    result = run_scenario(parse_scenario(document))
    v2 = result.nodes["v2"]
    orphan = bytes.fromhex(v2.reconcile().orphan_chain_txs[0])
    with pytest.raises(KeyUnavailable):
        v2.return_transfer(orphan)


def test_evidence_bundle_of_confirmed_record():
    people = [customer("alice", "v1"), customer("bob", "v2")]
    result = run_scenario(parse_scenario(single_network(people, [_transfer(20, "alice", "bob")])))
    v1 = result.nodes["v1"]
    record = _records(v1, Role.ORIGINATOR_SIDE)[0]
    bundle = v1.export_evidence(record.record_id)

    assert bundle.notice_bytes == record.notice.to_bytes()
    assert bundle.ack_bytes == record.ack.to_bytes()
    assert bundle.chain_tx.tx_id == record.chain_tx_id
    assert bundle.confirmed_tick is not None
    with pytest.raises(KeyError):
        v1.export_evidence("v1-o99999")


def test_failed_enrollment_is_logged():
    people = [customer("alice", "v1", attributes={"nickname": "al"})]
    result = run_scenario(parse_scenario(single_network(people)))
    failures = result.log.of_kind("enrollment_failed")
    assert [e.get("account") for e in failures] == ["alice"]
    assert result.nodes["v1"].accounts["alice"].certificate is None
