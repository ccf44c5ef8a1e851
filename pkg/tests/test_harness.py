"""
Whole-run tests: honest worlds, denials, routing, gossip, batching, message loss and determinism
File: tests/test_harness.py
"""
from pathlib import Path

import pytest

from conftest import customer, single_network
from simulation.harness import Simulation, run, run_scenario
from simulation.invariants import check_no_blind_broadcast
from simulation.scenario import load_scenario, parse_scenario
from simulation.scenario_generator import cycle_topology, generate_scenario, random_topology
from vasps.records import RecordStatus, Role

SCENARIOS = Path(__file__).parent.parent / "scenarios"


def _originator_records(result, status=None):
    return [
        record
        for vasp_id in sorted(result.nodes)
        for record in result.nodes[vasp_id].records
        if record.role is Role.ORIGINATOR_SIDE and (status is None or record.status is status)
    ]


def test_minimal_transfer_confirms():
    result = run_scenario(load_scenario(SCENARIOS / "minimal.json"))
    assert result.ok, result.breaches
    assert [t.label for t in result.transfers] == ["Broadcast"]
    assert result.metrics.transfers_confirmed == 1
    assert len(result.ledger.confirmed_transactions()) == 1

    beneficiary = [r for r in result.nodes["v2"].records if r.role is Role.BENEFICIARY_SIDE]
    assert [r.status for r in beneficiary] == [RecordStatus.CONFIRMED]
    record = _originator_records(result)[0]
    assert beneficiary[0].notice_id == record.notice_id
    assert record.chain_tx_id == record.binding


def test_default_world_is_clean():
    result = run_scenario(generate_scenario(1))
    metrics = result.metrics
    assert result.ok, result.breaches
    assert metrics.transfers_attempted == 200
    assert metrics.audit_violations == 0
    assert metrics.reconciliation_orphans == 0
    assert metrics.unconfirmed_records == 0
    assert metrics.transfers_in_flight == 0
    assert metrics.transfers_failed == 0
    assert metrics.transfers_confirmed > 0
    assert metrics.conservation_holds()


@pytest.mark.parametrize("seed", range(25))
def test_no_blind_broadcast(seed):
    scenario = generate_scenario(seed, customers=24, transfers=40, batches=3, p2p=5, drain_ticks=60)
    result = run_scenario(scenario)
    assert check_no_blind_broadcast(result.log, result.ledger) == []
    assert result.ok, result.breaches


def test_denials_write_nothing_to_the_ledger():
    result = run_scenario(load_scenario(SCENARIOS / "denials.json"))
    labels = [t.label for t in result.transfers]
    assert labels == [
        "NoOriginatorCert",
        "CertInvalid(beneficiary)",
        "SuspectParty",
        "BeneficiaryUnresolved",
        "Broadcast",
    ]
    # only the final, honest transfer reaches the chain
    assert len(result.log.of_kind("tx_submitted")) == 1
    assert len(result.ledger.confirmed_transactions()) == 1
    assert len(result.log.of_kind("notice_accepted")) == 1
    assert result.metrics.denied_by_reason == {
        "NoOriginatorCert": 1,
        "CertInvalid(beneficiary)": 1,
        "SuspectParty": 1,
        "BeneficiaryUnresolved": 1,
    }
    assert result.ok, result.breaches


def test_revoked_entries_leave_directories():
    result = run_scenario(load_scenario(SCENARIOS / "denials.json"))
    carol = result.nodes["v2"].accounts["carol"].certificate
    v1 = result.nodes["v1"]
    assert v1.revocations.is_revoked(carol.issuer_id, carol.serial)
    assert carol.serial not in {e.certificate_serial for e in v1.directory.snapshot_of("v2").entries}


@pytest.mark.parametrize("seed", range(10))
def test_gossip_converges_within_bound(seed):
    scenario = random_topology(seed)
    result = run_scenario(scenario)
    sync_period, max_latency = 10, scenario.settings.max_latency
    assert result.metrics.gossip_convergence_tick is not None
    # members gossip to each other directly, so one sync period plus delivery
    assert result.metrics.gossip_convergence_tick <= sync_period + max_latency
    assert result.ok, result.breaches


def test_cycle_routes_are_loop_free_and_complete():
    result = run_scenario(cycle_topology(1))
    nodes, registry = result.nodes, result.registry
    assert result.ok, result.breaches

    for vasp_id in sorted(nodes):
        node = nodes[vasp_id]
        for route in node.routes.routes():
            assert len(set(route.network_path)) == len(route.network_path)
        if not node.is_gateway:
            continue
        own = set(registry.networks_of(vasp_id))
        known = node.routes.all_hashes()
        for network_id, network in registry.networks.items():
            if network_id in own:
                continue
            for member in network.member_ids():
                published = {e.public_key_hash for e in nodes[member].publisher.latest.entries}
                assert published <= known, (vasp_id, member)

    resolved = [e for e in result.log.of_kind("beneficiary_resolved") if e.actor == "a1"]
    assert [e.get("networks") for e in resolved] == ["na>nb>nd"]
    assert [t.label for t in result.transfers] == ["Broadcast"]
    assert result.metrics.transfers_confirmed == 1


def _batch_world(batches: int):
    people = [customer(f"c{i}", "v1", custody="Commingled") for i in range(1, 5)]
    people += [customer(f"b{i}", "v2") for i in range(1, 4)]
    script = []
    for index in range(batches):
        first, second = f"c{index % 4 + 1}", f"c{(index + 1) % 4 + 1}"
        script.append({
            "action": "batch_transfer",
            "tick": 20 + index,
            "transfers": [
                {"origin": first, "target": {"customer": f"b{index % 3 + 1}", "form": "account"},
                 "amount": index + 1},
                {"origin": second, "target": {"customer": f"b{(index + 1) % 3 + 1}", "form": "account"},
                 "amount": 2 * index + 3},
            ],
        })
    return parse_scenario(single_network(people, script=script, seed=17))


def test_commingled_batches_settle_in_one_transaction_each():
    result = run_scenario(_batch_world(100))
    assert result.ok, result.breaches

    records = _originator_records(result)
    assert len(records) == 100
    assert all(r.notice.is_batch for r in records)
    assert all(r.status is RecordStatus.CONFIRMED for r in records)
    assert len({r.chain_tx_id for r in records}) == 100

    vasp_key = result.nodes["v1"].keypair.public_key
    for record in records:
        tx, _ = result.ledger.find(record.chain_tx_id)
        assert tx.amount == record.notice.amount == sum(e.amount for e in record.notice.batch_entries)
        assert tx.from_public_key == vasp_key
    assert len(result.ledger.confirmed_transactions()) == 100
    assert result.metrics.audit_violations == 0


def test_same_seed_same_digest():
    scenario = generate_scenario(9, customers=18, transfers=30, p2p=4, drain_ticks=50)
    first_log, first_metrics = run(scenario)
    second_log, second_metrics = run(scenario)
    assert first_log.hex_digest == second_log.hex_digest
    assert first_metrics == second_metrics


def test_distinct_seeds_distinct_digests():
    scenario = generate_scenario(2, customers=12, transfers=10, batches=1, p2p=2, drain_ticks=30)
    digests = {run_scenario(scenario, seed=seed).log.hex_digest for seed in range(20)}
    assert len(digests) == 20


def test_ledger_hash_chain_after_run():
    result = run_scenario(load_scenario(SCENARIOS / "minimal.json"))
    assert result.ledger.verify_chain()


def test_views_converged_helper_tracks_publication():
    simulation = Simulation(load_scenario(SCENARIOS / "minimal.json"))
    assert simulation.views_converged()
    simulation.nodes["v1"].publish_directory()
    assert not simulation.views_converged()


def test_random_loss_keeps_invariants():
    document = generate_scenario(4, customers=12, transfers=15, batches=1, p2p=2, drain_ticks=80).to_dict()
    document["settings"]["drop_probability"] = 0.3
    result = run_scenario(parse_scenario(document))

    dropped = result.log.of_kind("message_dropped")
    assert result.metrics.messages_dropped == len(dropped) > 0
    assert {e.get("reason") for e in dropped} <= {"loss", "unknown-recipient"}
    assert all(e.get("message_kind") for e in dropped)
    assert result.metrics.conservation_holds()
    assert check_no_blind_broadcast(result.log, result.ledger) == []
    assert result.ok, result.breaches


def test_lost_ack_leaves_one_unconfirmed_record():
    people = [customer("alice", "v1"), customer("bob", "v2")]
    script = [
        {"action": "drop_link", "tick": 0, "endpoint_a": "v1", "endpoint_b": "v2", "duration": 200,
         "kinds": ["transfer_notice_reply"]},
        {"action": "transfer", "tick": 20, "origin": "alice", "target": {"customer": "bob", "form": "key"},
         "amount": 25},
    ]
    result = run_scenario(parse_scenario(single_network(people, script)))

    assert [t.label for t in result.transfers] == ["ChannelTimeout"]
    assert not result.log.of_kind("tx_submitted")
    assert [e.actor for e in result.log.of_kind("notice_accepted")] == ["v2"]
    outage_drops = [e for e in result.log.of_kind("message_dropped") if e.get("reason") == "link-down"]
    assert [e.get("message_kind") for e in outage_drops] == ["transfer_notice_reply"]
    assert result.log.of_kind("link_dropped")[0].get("kinds") == "transfer_notice_reply"

    assert result.metrics.unconfirmed_records == 1
    reports = {r.vasp_id: r for r in result.reconciliations}
    assert reports["v1"].unconfirmed_records == ()
    assert len(reports["v2"].unconfirmed_records) == 1
    assert result.metrics.conservation_holds()
    assert result.ok, result.breaches


def _chain_world(script):
    """n1 (v1..v3) - n2 (v4..v6) - n3 (v7..v9), gateways v3-v4 and v6-v7"""
    layout = {"n1": ["v1", "v2", "v3"], "n2": ["v4", "v5", "v6"], "n3": ["v7", "v8", "v9"]}
    return parse_scenario({
        "seed": 5,
        "settings": {"drain_ticks": 80},
        "networks": [{"network_id": network_id} for network_id in layout],
        "cas": [{"ca_id": f"ca-{network_id}"} for network_id in layout],
        "vasps": [
            {"vasp_id": vasp_id, "networks": [network_id], "ca": f"ca-{network_id}"}
            for network_id, members in layout.items()
            for vasp_id in members
        ],
        "peering_links": [
            {"gateway_a": "v3", "network_a": "n1", "gateway_b": "v4", "network_b": "n2"},
            {"gateway_a": "v6", "network_a": "n2", "gateway_b": "v7", "network_b": "n3"},
        ],
        "customers": [customer("alice", "v1"), customer("zed", "v9")],
        "script": script + [
            {"action": "transfer", "tick": 80, "origin": "alice", "target": {"customer": "zed", "form": "key"},
             "amount": 10},
        ],
    })


def test_two_network_path_resolves():
    result = run_scenario(_chain_world([]))
    assert [t.label for t in result.transfers] == ["Broadcast"]
    resolved = [e for e in result.log.of_kind("beneficiary_resolved") if e.actor == "v1"]
    assert [e.get("networks") for e in resolved] == ["n1>n2>n3"]
    assert result.ok, result.breaches


def test_gateway_outage_mid_path_leaves_beneficiary_unresolved():
    outage = {"action": "drop_link", "tick": 60, "endpoint_a": "v6", "endpoint_b": "v7", "duration": 200,
              "kinds": ["xnet_query"]}
    result = run_scenario(_chain_world([outage]))

    assert [t.label for t in result.transfers] == ["BeneficiaryUnresolved"]
    assert not result.log.of_kind("notice_accepted")
    assert not result.ledger.confirmed_transactions()
    lost = [e for e in result.log.of_kind("xnet_query_lost") if e.actor == "v6"]
    assert [e.get("next_hop") for e in lost] == ["v7"]
    assert lost[0].get("path").startswith("v1>")
    assert result.metrics.conservation_holds()
    assert result.ok, result.breaches
