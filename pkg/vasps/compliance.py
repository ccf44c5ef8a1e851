"""
Post-event reconciliation, travel-rule audit and evidence export
File: vasps/compliance.py
"""
from dataclasses import dataclass
from typing import Collection, Iterable, List, Mapping, Optional, Set, Tuple

from chain.chain_sim import ChainTransaction, Ledger
from pki.crypto_core import canonical_encode, encode_sequence, flag, text, u64
from vasps.accounts import CustodyModel, KeyEvidence
from vasps.records import RecordStatus, TravelRuleRecord


@dataclass(frozen=True)
class ReconciliationReport:
    vasp_id: str
    matched: int
    orphan_chain_txs: Tuple[str, ...]
    unconfirmed_records: Tuple[str, ...]
    returned: int = 0

    def lines(self) -> List[str]:
        lines = [f"{self.vasp_id} matched={self.matched} orphans={len(self.orphan_chain_txs)} "
                 f"unconfirmed={len(self.unconfirmed_records)} returned={self.returned}"]
        lines.extend(f"{self.vasp_id} orphan {tx}" for tx in self.orphan_chain_txs)
        lines.extend(f"{self.vasp_id} unconfirmed {record_id}" for record_id in self.unconfirmed_records)
        return lines

    def encode(self) -> bytes:
        return canonical_encode([
            (1, text(self.vasp_id)),
            (2, u64(self.matched)),
            (3, encode_sequence(text(tx) for tx in self.orphan_chain_txs)),
            (4, encode_sequence(text(r) for r in self.unconfirmed_records)),
            (5, u64(self.returned)),
        ])


@dataclass(frozen=True)
class AuditReport:
    vasp_id: str
    checked: int
    violations: Tuple[Tuple[str, str], ...]

    def lines(self) -> List[str]:
        lines = [f"{self.vasp_id} checked={self.checked} violations={len(self.violations)}"]
        lines.extend(f"{self.vasp_id} violation {record_id} {field}" for record_id, field in self.violations)
        return lines

    def encode(self) -> bytes:
        return canonical_encode([
            (1, text(self.vasp_id)),
            (2, u64(self.checked)),
            (3, encode_sequence(
                canonical_encode([(1, text(record_id)), (2, text(field))])
                for record_id, field in self.violations
            )),
        ])


@dataclass(frozen=True)
class EvidenceBundle:
    """Signed notice, signed ack and the confirmed transaction of one record"""
    record_id: str
    notice_bytes: bytes
    ack_bytes: Optional[bytes]
    chain_tx: Optional[ChainTransaction]
    confirmed_tick: Optional[int]

    def encode(self) -> bytes:
        return canonical_encode([
            (1, text(self.record_id)),
            (2, self.notice_bytes),
            (3, flag(self.ack_bytes is not None)),
            (4, self.ack_bytes or b""),
            (5, flag(self.chain_tx is not None)),
            (6, self.chain_tx.to_bytes() if self.chain_tx else b""),
            (7, u64(self.confirmed_tick or 0)),
        ])


def reconcile(
    vasp_id: str,
    records: Iterable[TravelRuleRecord],
    ledger: Ledger,
    known_keys: Collection[bytes],
    returns: Optional[Mapping[bytes, bytes]] = None,
) -> ReconciliationReport:
    """
    Cross-join local records with the ledger entries touching this VASP's keys

    Args:
        vasp_id: Reconciling VASP
        records: Its travel-rule records
        ledger: Chain to compare against
        known_keys: VASP key plus every customer key it holds
        returns: return tx id -> the orphan tx it sent back

    Returns:
        ReconciliationReport; transfers between keys the VASP does not know
        are out of scope and never reported
    """
    records = list(records)
    returns = dict(returns or {})
    confirmed_ids: Set[bytes] = {
        bytes(r.chain_tx_id) for r in records
        if r.status is RecordStatus.CONFIRMED and r.chain_tx_id is not None
    }
    handled: Set[bytes] = set(returns) | set(returns.values())

    matched = 0
    orphans: List[str] = []
    for tx, _ in ledger.confirmed_transactions():
        if tx.from_public_key not in known_keys and tx.to_public_key not in known_keys:
            continue
        tx_id = bytes(tx.tx_id)
        if tx_id in confirmed_ids:
            matched += 1
        elif tx_id not in handled:
            orphans.append(tx_id.hex())

    unconfirmed = tuple(
        r.record_id for r in records
        if r.status in (RecordStatus.PENDING_ACK, RecordStatus.PENDING_CHAIN)
    )
    return ReconciliationReport(
        vasp_id=vasp_id,
        matched=matched,
        orphan_chain_txs=tuple(orphans),
        unconfirmed_records=unconfirmed,
        returned=len(returns),
    )


def _evidence_violations(prefix: str, evidence: KeyEvidence) -> List[str]:
    # the evidence names its own custody model; disclosed attributes may omit it
    missing = []
    if evidence.ownership is None:
        missing.append(f"{prefix}_key_ownership_evidence")
    if evidence.custody_model is CustodyModel.KEY_CUSTODY and evidence.operator is None:
        missing.append(f"{prefix}_key_operator_evidence")
    return missing


def audit_record(record: TravelRuleRecord) -> List[str]:
    """Names of the travel-rule fields a confirmed record lacks"""
    notice = record.notice
    ack = record.ack
    missing: List[str] = []

    entries = notice.entries()
    if notice.originator_assertion is None or any(e.originator_assertion is None for e in entries):
        missing.append("originator_assertion")
    missing.extend(_evidence_violations("originator", notice.originator_evidence))

    if ack is None or not ack.accepted or len(ack.beneficiary_assertions) != len(entries):
        missing.append("beneficiary_assertion")
    if ack is None or len(ack.beneficiary_evidences) != len(entries):
        missing.append("beneficiary_key_ownership_evidence")
    else:
        for evidence in ack.beneficiary_evidences:
            for name in _evidence_violations("beneficiary", evidence):
                if name not in missing:
                    missing.append(name)

    if notice.amount <= 0:
        missing.append("amount")
    if notice.execution_tick < 0:
        missing.append("execution_tick")
    if not notice.originator_vasp_id:
        missing.append("originator_vasp_id")
    if not notice.beneficiary_vasp_id:
        missing.append("beneficiary_vasp_id")
    return missing


def audit_travel_rule(vasp_id: str, records: Iterable[TravelRuleRecord]) -> AuditReport:
    """
    Check every confirmed record for the data the travel rule requires

    Returns:
        AuditReport listing (record_id, missing field) pairs
    """
    checked = 0
    violations: List[Tuple[str, str]] = []
    for record in records:
        if record.status is not RecordStatus.CONFIRMED:
            continue
        checked += 1
        violations.extend((record.record_id, name) for name in audit_record(record))
    return AuditReport(vasp_id=vasp_id, checked=checked, violations=tuple(violations))
