"""
Run reports: text and canonical forms, route and ledger dumps
File: simulation/reports.py
"""
from typing import Iterable, List, Mapping, Sequence

from chain.chain_sim import Ledger
from pki.crypto_core import canonical_encode, encode_sequence, text, u64
from simulation.event_log import EventLog, Metrics
from vasps.compliance import AuditReport, ReconciliationReport
from vasps.vasp_node import VaspNode

REPORT_FORMATS = ("text", "canonical")
REPORT_HEADER = "travel-rule simulation report"


def _header(log: EventLog) -> List[str]:
    return [REPORT_HEADER, f"digest {log.hex_digest}", f"events {len(log)}"]


def text_report(
    log: EventLog,
    metrics: Metrics,
    audits: Sequence[AuditReport] = (),
    reconciliations: Sequence[ReconciliationReport] = (),
) -> List[str]:
    """
    Report lines; an empty run yields the header only

    Sections are [metrics] (one name=value line per counter), [denied] (one
    line per reason), [reconciliation] (one line per orphan and per
    unconfirmed record after each VASP summary) and [audit] (one line per
    violation after each VASP summary).
    """
    lines = _header(log)
    if not len(log):
        return lines

    lines.append("[metrics]")
    lines.extend(f"{name}={value}" for name, value in metrics.counters())
    lines.append("[denied]")
    lines.extend(f"{reason}={count}" for reason, count in sorted(metrics.denied_by_reason.items()))
    lines.append("[reconciliation]")
    for report in reconciliations:
        lines.extend(report.lines())
    lines.append("[audit]")
    for report in audits:
        lines.extend(report.lines())
    return lines


def canonical_report(
    log: EventLog,
    metrics: Metrics,
    audits: Sequence[AuditReport] = (),
    reconciliations: Sequence[ReconciliationReport] = (),
) -> bytes:
    fields = [(1, text(REPORT_HEADER)), (2, log.digest), (3, u64(len(log)))]
    if len(log):
        fields.extend([
            (4, metrics.encode()),
            (5, encode_sequence(r.encode() for r in reconciliations)),
            (6, encode_sequence(a.encode() for a in audits)),
        ])
    return canonical_encode(fields)


def emit_report(
    log: EventLog,
    metrics: Metrics,
    fmt: str = "text",
    audits: Sequence[AuditReport] = (),
    reconciliations: Sequence[ReconciliationReport] = (),
) -> bytes:
    """
    Render a run report

    Args:
        log: Run event log
        metrics: Run metrics
        fmt: 'text' or 'canonical'
        audits: Per-VASP audit reports
        reconciliations: Per-VASP reconciliation reports

    Returns:
        Report bytes (UTF-8 text ending in a newline, or a canonical record)

    Raises:
        ValueError: Unknown format
    """
    if fmt == "text":
        return ("\n".join(text_report(log, metrics, audits, reconciliations)) + "\n").encode('utf-8')
    if fmt == "canonical":
        return canonical_report(log, metrics, audits, reconciliations)
    raise ValueError(f"unknown report format '{fmt}', expected one of {REPORT_FORMATS}")


def dump_routes(nodes: Mapping[str, VaspNode]) -> List[str]:
    """Route tables of every gateway"""
    lines: List[str] = []
    for vasp_id in sorted(nodes):
        node = nodes[vasp_id]
        if not node.is_gateway:
            continue
        lines.append(f"[{vasp_id}]")
        lines.extend(f"  {line}" for line in node.routes.dump_lines())
    return lines


def dump_ledger(ledger: Ledger) -> List[str]:
    return ledger.export_lines()


def report_section(lines: Iterable[str], name: str) -> List[str]:
    """Lines of one [name] section of a text report"""
    section: List[str] = []
    inside = False
    for line in lines:
        if line.startswith("["):
            inside = line == f"[{name}]"
            continue
        if inside:
            section.append(line)
    return section
