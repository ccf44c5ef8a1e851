"""
Message bus delivery, loss and handler failure tests
File: tests/test_message_bus.py
"""
import simpy

from simulation.actor import BaseActor
from simulation.event_log import EventLog
from simulation.message_bus import LinkOutage, MessageBus
from utils.errors import InvalidDelta, InvalidTransition


class Recorder(BaseActor):
    component = "recorder"

    def __init__(self, actor_id, bus, event_log):
        super().__init__(actor_id, bus, event_log)
        self.seen = []

    def handle_message(self, envelope):
        if envelope.kind == "stale_delta":
            raise InvalidDelta("delta base is behind")
        if envelope.kind == "slow_failure":
            return self._fail_later()
        self.seen.append((self.now, envelope.kind))
        return None

    def _fail_later(self):
        yield self.env.timeout(2)
        raise InvalidTransition("Confirmed -> PendingAck")


def _world(**bus_options):
    env, log = simpy.Environment(), EventLog()
    bus = MessageBus(env, seed=1, max_latency=1, event_log=log, **bus_options)
    return env, log, bus, Recorder("a", bus, log), Recorder("b", bus, log)


def _drops(log):
    return [(e.get("message_kind"), e.get("reason")) for e in log.of_kind("message_dropped")]


def test_failing_handler_is_recorded_and_delivery_continues():
    env, log, bus, _, b = _world()
    bus.send("a", "b", "stale_delta", None)
    bus.send("a", "b", "ping", None)
    env.run(until=5)

    errors = log.of_kind("handler_error")
    assert [(e.actor, e.get("message_kind"), e.get("error")) for e in errors] == [("b", "stale_delta", "InvalidDelta")]
    assert errors[0].get("sender") == "a"
    assert b.seen == [(1, "ping")]


def test_failing_generator_handler_does_not_stop_the_run():
    env, log, bus, _, b = _world()

    def later():
        yield env.timeout(5)
        bus.send("a", "b", "ping", None)

    bus.send("a", "b", "slow_failure", None)
    env.process(later())
    env.run(until=10)

    errors = log.of_kind("handler_error")
    assert [(e.tick, e.get("message_kind"), e.get("error")) for e in errors] == [(3, "slow_failure", "InvalidTransition")]
    assert b.seen == [(6, "ping")]


def test_drops_are_logged_with_message_kind():
    env, log, bus, _, b = _world()
    bus.drop_link("a", "b", 0, 10, kinds=["stale_delta"])
    bus.send("a", "nobody", "ping", None)
    bus.send("a", "b", "stale_delta", None)
    bus.send("b", "a", "pong", None)
    bus.send("a", "b", "ping", None)
    env.run(until=5)

    assert _drops(log) == [("ping", "unknown-recipient"), ("stale_delta", "link-down")]
    assert all(e.actor == "bus" for e in log.of_kind("message_dropped"))
    assert (bus.sent, bus.dropped, bus.delivered) == (4, 2, 2)
    assert b.seen == [(1, "ping")]
    assert not log.of_kind("handler_error")


def test_certain_loss_drops_everything():
    env, log, bus, a, b = _world(drop_probability=1.0)
    for kind in ("ping", "pong", "ping"):
        bus.send("a", "b", kind, None)
    env.run(until=5)
    assert _drops(log) == [("ping", "loss"), ("pong", "loss"), ("ping", "loss")]
    assert bus.dropped == 3 and not b.seen


def test_request_times_out_across_an_outage():
    env, log, bus, a, _ = _world()
    bus.drop_link("a", "b", 0, 100)
    outcome = []

    def ask():
        reply = yield from a.request("b", "ping", None, timeout=4)
        outcome.append((env.now, reply))

    env.process(ask())
    env.run(until=10)
    assert outcome == [(4, None)]
    assert _drops(log) == [("ping", "link-down")]


def test_outage_window_and_kind_filter():
    everything = LinkOutage("a", "b", 10, 20)
    assert everything.covers("b", "a", "ping", 19, 22)
    assert everything.covers("a", "b", "ping", 5, 10)
    assert not everything.covers("a", "b", "ping", 5, 9)
    assert not everything.covers("a", "b", "ping", 20, 21)
    assert not everything.covers("a", "c", "ping", 12, 13)

    acks_only = LinkOutage("a", "b", 10, 20, frozenset({"transfer_notice_reply"}))
    assert acks_only.covers("b", "a", "transfer_notice_reply", 12, 13)
    assert not acks_only.covers("a", "b", "transfer_notice", 12, 13)
