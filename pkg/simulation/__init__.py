"""
Simulation package - clock, message bus, actors and the evidence log
File: simulation/__init__.py

The harness, CA actor and scenario modules are imported by path
(simulation.harness, ...) since they depend on the vasps package.
"""

from .actor import BaseActor
from .message_bus import Envelope, LinkOutage, MessageBus
from .event_log import Event, EventLog, Metrics, chain_digest

__all__ = [
    'BaseActor',
    'Envelope',
    'LinkOutage',
    'MessageBus',
    'Event',
    'EventLog',
    'Metrics',
    'chain_digest',
]
