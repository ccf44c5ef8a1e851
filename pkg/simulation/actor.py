"""
Base actor: message dispatch, request/reply with timeouts, periodic work
File: simulation/actor.py
"""
import inspect
from abc import ABC, abstractmethod
from typing import Any, Callable, Dict, Generator, Optional

import simpy

from simulation.event_log import EventLog
from simulation.message_bus import Envelope, MessageBus
from utils.errors import TravelRuleError
from utils.logging_utils import get_logger


class BaseActor(ABC):
    """Base class for every simulated party (CAs and VASP nodes)"""

    component = "actor"

    def __init__(self, actor_id: str, bus: MessageBus, event_log: EventLog):
        """
        Initialize actor and register it on the bus

        Args:
            actor_id: Unique id; also the delivery order key within a tick
            bus: Message bus
            event_log: Shared evidence log
        """
        self.actor_id = actor_id
        self.bus = bus
        self.env: simpy.Environment = bus.env
        self.events = event_log
        self._pending: Dict[int, simpy.Event] = {}
        self._logger = get_logger(self.component, actor=actor_id)
        bus.register(self)

    @property
    def now(self) -> int:
        return int(self.env.now)

    @abstractmethod
    def handle_message(self, envelope: Envelope) -> Optional[Generator]:
        """
        React to one delivered message

        Args:
            envelope: Incoming message (never a reply to one of our requests)

        Returns:
            None, or a generator that is run as a simpy process when the
            handler has to wait on other actors
        """
        pass

    def start(self):
        """Start periodic processes; called once by the harness before the run"""
        pass

    # Messaging

    def send(self, recipient: str, kind: str, payload: Any) -> Envelope:
        return self.bus.send(self.actor_id, recipient, kind, payload)

    def reply(self, envelope: Envelope, payload: Any) -> Envelope:
        return self.bus.send(self.actor_id, envelope.sender, f"{envelope.kind}_reply", payload, reply_to=envelope.seq)

    def request(self, recipient: str, kind: str, payload: Any, timeout: int):
        """
        Send and wait for the reply (use with ``yield from``)

        Returns:
            Reply payload, or None once timeout ticks pass without one
        """
        envelope = self.send(recipient, kind, payload)
        waiter = self.env.event()
        self._pending[envelope.seq] = waiter
        yield waiter | self.env.timeout(max(1, int(timeout)))
        self._pending.pop(envelope.seq, None)
        if waiter.triggered:
            return waiter.value
        return None

    def receive(self, envelope: Envelope):
        """Entry point used by the bus"""
        if envelope.reply_to is not None:
            waiter = self._pending.pop(envelope.reply_to, None)
            if waiter is None or waiter.triggered:
                self._logger.debug("late reply dropped", kind=envelope.kind, sender=envelope.sender)
                return
            waiter.succeed(envelope.payload)
            return

        try:
            result = self.handle_message(envelope)
        except TravelRuleError as e:
            self._handler_failed(envelope, e)
            return

        if inspect.isgenerator(result):
            self.env.process(self._guarded(envelope, result))

    def _guarded(self, envelope: Envelope, work: Generator):
        try:
            yield from work
        except TravelRuleError as e:
            self._handler_failed(envelope, e)

    def _handler_failed(self, envelope: Envelope, error: TravelRuleError):
        self._logger.warning("handler failed", kind=envelope.kind, sender=envelope.sender, error=str(error))
        self.record("handler_error", message_kind=envelope.kind, sender=envelope.sender, error=type(error).__name__)

    # Helpers

    def every(self, period: int, action: Callable[[], Any], first_at: Optional[int] = None) -> simpy.Process:
        """Run action every period ticks, first at first_at (default: one period in)"""
        def loop():
            yield self.env.timeout(period if first_at is None else first_at)
            while True:
                action()
                yield self.env.timeout(period)
        return self.env.process(loop())

    def record(self, kind: str, **fields: Any):
        self.events.append(self.now, self.actor_id, kind, **fields)
