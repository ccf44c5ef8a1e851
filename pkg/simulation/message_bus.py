"""
Tick-driven message bus with seeded per-link latency, loss and outages
File: simulation/message_bus.py
"""
import random
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Dict, FrozenSet, Iterable, List, Optional, Tuple

import simpy

from utils.id_utils import derive_rng
from utils.logging_utils import get_logger

if TYPE_CHECKING:
    from simulation.actor import BaseActor
    from simulation.event_log import EventLog

DEFAULT_MAX_LATENCY = 3


@dataclass(frozen=True)
class Envelope:
    """Authenticated point-to-point message; the bus never alters payloads"""
    seq: int
    sender: str
    recipient: str
    kind: str
    payload: Any
    sent_at: int
    deliver_at: int
    reply_to: Optional[int] = None


@dataclass(frozen=True)
class LinkOutage:
    endpoint_a: str
    endpoint_b: str
    start: int
    end: int
    kinds: FrozenSet[str] = frozenset()

    def covers(self, sender: str, recipient: str, kind: str, sent_at: int, deliver_at: int) -> bool:
        """An empty kinds set takes down every message kind"""
        if {sender, recipient} != {self.endpoint_a, self.endpoint_b}:
            return False
        if self.kinds and kind not in self.kinds:
            return False
        return sent_at < self.end and deliver_at >= self.start


class MessageBus:
    """
    Delivers messages once per tick in (recipient id, send order) order

    Args:
        env: simpy environment driving the simulation clock
        seed: Scenario seed; every directed link gets its own PRNG stream
        max_latency: Latency is drawn uniformly from [1, max_latency] ticks
        drop_probability: Independent loss probability per message
        event_log: Where drops are recorded
    """

    def __init__(
        self,
        env: simpy.Environment,
        seed: int,
        max_latency: int = DEFAULT_MAX_LATENCY,
        drop_probability: float = 0.0,
        event_log: Optional["EventLog"] = None,
    ):
        if max_latency < 1:
            raise ValueError("max_latency must be >= 1")
        if not 0.0 <= drop_probability <= 1.0:
            raise ValueError("drop_probability must be within [0, 1]")

        self.env = env
        self.seed = seed
        self.max_latency = max_latency
        self.drop_probability = drop_probability
        self.event_log = event_log

        self._actors: Dict[str, "BaseActor"] = {}
        self._buckets: Dict[int, List[Envelope]] = {}
        self._link_rngs: Dict[Tuple[str, str], random.Random] = {}
        self._outages: List[LinkOutage] = []
        self._seq = 0

        self.sent = 0
        self.delivered = 0
        self.dropped = 0

        self._logger = get_logger("bus")
        self._clock = env.process(self._run())

    @property
    def now(self) -> int:
        return int(self.env.now)

    def register(self, actor: "BaseActor"):
        if actor.actor_id in self._actors:
            raise ValueError(f"actor {actor.actor_id} registered twice")
        self._actors[actor.actor_id] = actor

    def actor(self, actor_id: str) -> Optional["BaseActor"]:
        return self._actors.get(actor_id)

    def drop_link(
        self, endpoint_a: str, endpoint_b: str, start: int, end: int, kinds: Optional[Iterable[str]] = None
    ) -> LinkOutage:
        """
        Lose messages between the two endpoints that are in flight during [start, end)

        Args:
            kinds: Only lose these message kinds (default: all of them)
        """
        outage = LinkOutage(endpoint_a, endpoint_b, start, end, frozenset(kinds or ()))
        self._outages.append(outage)
        return outage

    def _link_rng(self, sender: str, recipient: str) -> random.Random:
        key = (sender, recipient)
        rng = self._link_rngs.get(key)
        if rng is None:
            rng = derive_rng(self.seed, "link", sender, recipient)
            self._link_rngs[key] = rng
        return rng

    def send(self, sender: str, recipient: str, kind: str, payload: Any, reply_to: Optional[int] = None) -> Envelope:
        """
        Queue a message

        Returns:
            The envelope (also when it was lost; its seq still identifies the request)
        """
        rng = self._link_rng(sender, recipient)
        latency = rng.randint(1, self.max_latency)
        lost = rng.random() < self.drop_probability

        self._seq += 1
        now = self.now
        envelope = Envelope(
            seq=self._seq,
            sender=sender,
            recipient=recipient,
            kind=kind,
            payload=payload,
            sent_at=now,
            deliver_at=now + latency,
            reply_to=reply_to,
        )
        self.sent += 1

        reason = None
        if recipient not in self._actors:
            reason = "unknown-recipient"
        elif lost:
            reason = "loss"
        elif any(o.covers(sender, recipient, kind, now, envelope.deliver_at) for o in self._outages):
            reason = "link-down"

        if reason is not None:
            self.dropped += 1
            self._logger.debug("message dropped", kind=kind, sender=sender, recipient=recipient, reason=reason)
            if self.event_log is not None:
                self.event_log.append(now, "bus", "message_dropped", message_kind=kind, sender=sender,
                                      recipient=recipient, reason=reason)
            return envelope

        self._buckets.setdefault(envelope.deliver_at, []).append(envelope)
        return envelope

    def _run(self):
        while True:
            due = self._buckets.pop(self.now, [])
            for envelope in sorted(due, key=lambda e: (e.recipient, e.seq)):
                self.delivered += 1
                self._actors[envelope.recipient].receive(envelope)
            yield self.env.timeout(1)
