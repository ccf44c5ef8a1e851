"""
Whole-run safety checks over the event log, the ledger and node state
File: simulation/invariants.py
"""
from typing import Dict, Iterable, List, Mapping, Set

from chain.chain_sim import Ledger
from simulation.event_log import EventLog, Metrics
from utils.errors import ModelKeyMismatch
from vasps.records import RecordStatus, Role
from vasps.vasp_node import VaspNode


def check_no_blind_broadcast(log: EventLog, ledger: Ledger) -> List[str]:
    """
    Every VASP-submitted transaction must follow an accepted ack with the same binding

    Return transfers and P2P transfers carry their own submission events and
    are exempt; a ledger transaction with no submission event at all is a
    breach.
    """
    breaches: List[str] = []
    accepted: Dict[str, Set[str]] = {}
    submitted: Dict[str, str] = {}

    for event in log:
        if event.kind == "ack_accepted":
            accepted.setdefault(event.actor, set()).add(event.get("binding"))
        elif event.kind == "tx_submitted":
            tx, binding = event.get("tx"), event.get("binding")
            submitted[tx] = event.actor
            if tx != binding:
                breaches.append(f"{event.actor}: tx {tx[:12]} broadcast against binding {binding[:12]}")
            elif binding not in accepted.get(event.actor, set()):
                breaches.append(f"{event.actor}: tx {tx[:12]} broadcast without an accepted ack")
        elif event.kind in ("return_submitted", "p2p_submitted"):
            submitted[event.get("tx")] = event.actor

    for tx, _ in ledger.confirmed_transactions():
        if tx.tx_id.hex() not in submitted:
            breaches.append(f"ledger tx {tx.tx_id.hex()[:12]} has no submission event")
    return breaches


def check_conservation(metrics: Metrics) -> List[str]:
    if metrics.conservation_holds():
        return []
    return [
        f"transfers_attempted={metrics.transfers_attempted} != denied {metrics.transfers_denied} + confirmed "
        f"{metrics.transfers_confirmed} + failed {metrics.transfers_failed} + in flight {metrics.transfers_in_flight}"
    ]


def check_chain(ledger: Ledger) -> List[str]:
    return [] if ledger.verify_chain() else ["ledger hash chain does not verify"]


def check_directories(nodes: Mapping[str, VaspNode]) -> List[str]:
    """No member lists a serial it knows to be revoked"""
    breaches = []
    for vasp_id in sorted(nodes):
        node = nodes[vasp_id]
        for owner in node.directory.publishers:
            for entry in node.directory.snapshot_of(owner).entries:
                if node.revocations.is_revoked(entry.issuer_ca_id, entry.certificate_serial):
                    breaches.append(f"{vasp_id}: view of {owner} lists revoked serial {entry.certificate_serial}")
    return breaches


def check_custody(nodes: Mapping[str, VaspNode]) -> List[str]:
    breaches = []
    for vasp_id in sorted(nodes):
        for account_id in sorted(nodes[vasp_id].accounts):
            try:
                nodes[vasp_id].accounts[account_id].check_invariants()
            except ModelKeyMismatch as e:
                breaches.append(f"{vasp_id}: {e}")
    return breaches


def check_record_symmetry(nodes: Mapping[str, VaspNode]) -> List[str]:
    """Each confirmed originator record has exactly one confirmed beneficiary twin"""
    beneficiary_side: Dict[bytes, int] = {}
    for node in nodes.values():
        for record in node.records:
            if record.role is Role.BENEFICIARY_SIDE and record.status is RecordStatus.CONFIRMED:
                beneficiary_side[record.notice_id] = beneficiary_side.get(record.notice_id, 0) + 1

    breaches = []
    for vasp_id in sorted(nodes):
        for record in nodes[vasp_id].records:
            if record.role is Role.ORIGINATOR_SIDE and record.status is RecordStatus.CONFIRMED:
                count = beneficiary_side.get(record.notice_id, 0)
                if count != 1:
                    breaches.append(f"{record.record_id}: {count} confirmed beneficiary records")
    return breaches


def run_all(log: EventLog, ledger: Ledger, metrics: Metrics, nodes: Mapping[str, VaspNode]) -> List[str]:
    checks: Iterable[List[str]] = (
        check_no_blind_broadcast(log, ledger),
        check_conservation(metrics),
        check_chain(ledger),
        check_directories(nodes),
        check_custody(nodes),
        check_record_symmetry(nodes),
    )
    return [breach for found in checks for breach in found]
