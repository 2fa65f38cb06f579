import numpy as np
import pytest

from coopmcl.swarm.channel import SimulatedChannel


def test_immediate_delivery():
    ch = SimulatedChannel()
    assert ch.send(0, 1, "cloud", b"abc", now=1.0)
    [env] = ch.receive(1, now=1.0)
    assert (env.src, env.dst, env.kind, env.payload) == (0, 1, "cloud", b"abc")
    assert ch.receive(1, now=2.0) == []
    assert ch.bytes_sent == 3


def test_latency_holds_messages():
    ch = SimulatedChannel(latency=0.3)
    ch.send(0, 1, "m", b"x", now=1.0)
    assert ch.receive(1, now=1.2) == []
    assert len(ch.receive(1, now=1.3)) == 1


def test_mailboxes_are_separate():
    ch = SimulatedChannel()
    ch.send(0, 1, "m", b"x", 0.0)
    assert ch.receive(2, 0.0) == []
    assert ch.discard(1) == 1 and ch.receive(1, 0.0) == []


def test_drop_all_and_none():
    ch = SimulatedChannel(drop_probability=1.0)
    assert not any(ch.send(0, 1, "m", b"x", 0.0) for _ in range(20))
    assert ch.receive(1, 10.0) == [] and ch.dropped == 20 and ch.sent == 20


def test_drop_rate():
    ch = SimulatedChannel(drop_probability=0.3, rng=np.random.default_rng(1))
    ok = sum(ch.send(0, 1, "m", b"", 0.0) for _ in range(10_000))
    assert abs(1 - ok / 10_000 - 0.3) < 0.02


def test_validation():
    with pytest.raises(ValueError):
        SimulatedChannel(latency=-1)
    with pytest.raises(ValueError):
        SimulatedChannel(drop_probability=1.5)
    with pytest.raises(TypeError):
        SimulatedChannel().send(0, 1, "m", np.zeros(3), 0.0)
