"""
Digest-chained event log and run metrics
File: simulation/event_log.py

Each appended event extends a running digest:
    d_0 = 32 zero bytes, d_i = SHA-256(d_{i-1} || canonical(event_i))
so two runs agree on the final digest only if they agree on every event.
"""
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Iterator, List, Optional, Tuple

from pki.crypto_core import canonical_encode, digest, encode_mapping, text, u64
from utils.logging_utils import get_logger

GENESIS_DIGEST = bytes(32)


def _render(value: Any) -> str:
    if isinstance(value, (bytes, bytearray)):
        return bytes(value).hex()
    if isinstance(value, (list, tuple)):
        return ">".join(_render(v) for v in value)
    if hasattr(value, "value") and isinstance(getattr(value, "value"), str):
        return value.value
    return str(value)


@dataclass(frozen=True)
class Event:
    tick: int
    actor: str
    kind: str
    fields: Tuple[Tuple[str, str], ...] = ()

    def get(self, name: str, default: Optional[str] = None) -> Optional[str]:
        for key, value in self.fields:
            if key == name:
                return value
        return default

    def encode(self) -> bytes:
        return canonical_encode([
            (1, u64(self.tick)),
            (2, text(self.actor)),
            (3, text(self.kind)),
            (4, encode_mapping(dict(self.fields))),
        ])

    def to_dict(self) -> Dict[str, Any]:
        return {"tick": self.tick, "actor": self.actor, "kind": self.kind, "fields": dict(self.fields)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Event":
        return cls(
            tick=int(data["tick"]),
            actor=str(data["actor"]),
            kind=str(data["kind"]),
            fields=tuple(sorted((str(k), str(v)) for k, v in data.get("fields", {}).items())),
        )


def chain_digest(events: Iterable[Event]) -> bytes:
    """Recompute the running digest over a sequence of events"""
    current = GENESIS_DIGEST
    for event in events:
        current = digest(current + event.encode())
    return current


class EventLog:
    """Ordered (tick, actor, event) records; the evidence base of a run"""

    def __init__(self):
        self._events: List[Event] = []
        self._digest = GENESIS_DIGEST
        self._logger = get_logger("event_log")

    def append(self, tick: int, actor: str, kind: str, **fields: Any) -> Event:
        event = Event(
            tick=int(tick),
            actor=actor,
            kind=kind,
            fields=tuple(sorted((k, _render(v)) for k, v in fields.items() if v is not None)),
        )
        self._events.append(event)
        self._digest = digest(self._digest + event.encode())
        self._logger.debug(kind, tick=event.tick, actor=actor, **dict(event.fields))
        return event

    @property
    def digest(self) -> bytes:
        return self._digest

    @property
    def hex_digest(self) -> str:
        return self._digest.hex()

    @property
    def events(self) -> Tuple[Event, ...]:
        return tuple(self._events)

    def __len__(self) -> int:
        return len(self._events)

    def __iter__(self) -> Iterator[Event]:
        return iter(self._events)

    def of_kind(self, *kinds: str) -> List[Event]:
        return [e for e in self._events if e.kind in kinds]

    def to_json(self) -> Dict[str, Any]:
        return {"digest": self.hex_digest, "events": [e.to_dict() for e in self._events]}

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> Tuple["EventLog", str]:
        """
        Rebuild a log from its JSON form

        Returns:
            (log with a recomputed digest, digest claimed by the file)
        """
        log = cls()
        for item in data.get("events", []):
            event = Event.from_dict(item)
            log._events.append(event)
            log._digest = digest(log._digest + event.encode())
        return log, str(data.get("digest", ""))


@dataclass
class Metrics:
    """Counters collected over one run"""
    transfers_attempted: int = 0
    denied_by_reason: Dict[str, int] = field(default_factory=dict)
    transfers_confirmed: int = 0
    transfers_failed: int = 0
    transfers_in_flight: int = 0
    resolution_attempts: int = 0
    resolution_successes: int = 0
    resolution_hops: int = 0
    audit_violations: int = 0
    reconciliation_orphans: int = 0
    unconfirmed_records: int = 0
    gossip_convergence_tick: Optional[int] = None
    advertisements_accepted: int = 0
    advertisements_dropped: int = 0
    messages_sent: int = 0
    messages_dropped: int = 0

    def deny(self, label: str):
        self.denied_by_reason[label] = self.denied_by_reason.get(label, 0) + 1

    @property
    def transfers_denied(self) -> int:
        return sum(self.denied_by_reason.values())

    @property
    def resolution_success_rate(self) -> float:
        if not self.resolution_attempts:
            return 0.0
        return self.resolution_successes / self.resolution_attempts

    @property
    def mean_hop_count(self) -> float:
        if not self.resolution_successes:
            return 0.0
        return self.resolution_hops / self.resolution_successes

    def conservation_holds(self) -> bool:
        accounted = self.transfers_denied + self.transfers_confirmed + self.transfers_failed + self.transfers_in_flight
        return self.transfers_attempted == accounted

    def counters(self) -> List[Tuple[str, str]]:
        """Scalar counters in report order"""
        convergence = "" if self.gossip_convergence_tick is None else str(self.gossip_convergence_tick)
        return [
            ("transfers_attempted", str(self.transfers_attempted)),
            ("transfers_denied", str(self.transfers_denied)),
            ("transfers_confirmed", str(self.transfers_confirmed)),
            ("transfers_failed", str(self.transfers_failed)),
            ("transfers_in_flight", str(self.transfers_in_flight)),
            ("resolution_attempts", str(self.resolution_attempts)),
            ("resolution_success_rate", f"{self.resolution_success_rate:.4f}"),
            ("mean_hop_count", f"{self.mean_hop_count:.4f}"),
            ("audit_violations", str(self.audit_violations)),
            ("reconciliation_orphans", str(self.reconciliation_orphans)),
            ("unconfirmed_records", str(self.unconfirmed_records)),
            ("gossip_convergence_tick", convergence),
            ("advertisements_accepted", str(self.advertisements_accepted)),
            ("advertisements_dropped", str(self.advertisements_dropped)),
            ("messages_sent", str(self.messages_sent)),
            ("messages_dropped", str(self.messages_dropped)),
        ]

    def encode(self) -> bytes:
        scalars = dict(self.counters())
        return canonical_encode([
            (1, encode_mapping(scalars)),
            (2, encode_mapping({k: str(v) for k, v in self.denied_by_reason.items()})),
        ])
