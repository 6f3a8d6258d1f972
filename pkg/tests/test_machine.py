from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from sire import errors as E
from sire.machine import (ACCEPTED, QUEUED, REJECTED, Connect, Disconnect, Join, Machine, MachineConfig,
                          NewEnd, Receive, Send, SetDest, Sleep, Spawn)
from sire.trace import EndId, EventKind, format_trace


def kinds(events, *only):
    return [e.kind for e in events if not only or e.kind in only]


def idle():
    return
    yield


# -- config -------------------------------------------------------------------


@pytest.mark.parametrize("kw", [dict(processors=0), dict(backoff_base=0), dict(backoff_cap=0),
                                dict(backoff_factor=0), dict(hop_latency=-1), dict(queue_capacity=0)])
def test_config_rejects_bad_values(kw):
    with pytest.raises(ValueError):
        MachineConfig(**kw)


def test_config_defaults():
    c = MachineConfig()
    assert (c.processors, c.seed, c.hop_latency) == (64, 0, 1)
    assert [c.backoff_delay(k) for k in range(8)] == [4, 8, 16, 32, 64, 128, 256, 256]


# -- threads and ends ------------------------------------------------------------


def test_spawn_emits_thread_start_on_processor():
    m = Machine()
    m.spawn(0, idle())
    ev = m.run()
    assert ev[0].kind is EventKind.THREAD_START and ev[0].proc == 0


def test_three_spawns_get_distinct_ids():
    m = Machine()
    tids = [m.spawn(0, idle()) for _ in range(3)]
    assert len(set(tids)) == 3
    ev = m.run()
    assert sorted(e.thread for e in ev if e.kind is EventKind.THREAD_END) == sorted(tids)


def test_spawn_outside_machine_is_invalid():
    m = Machine(MachineConfig(processors=4))
    with pytest.raises(E.InvalidProcessor):
        m.spawn(4, idle())
    with pytest.raises(E.InvalidProcessor):
        m.new_end(-1)


def test_end_ids_count_per_processor():
    m = Machine()
    assert m.new_end(3) == EndId(3, 0)
    assert m.new_end(3) == EndId(3, 1)
    assert m.new_end(0) == EndId(0, 0)


def test_end_array_shares_local_id():
    m = Machine()
    m.new_end(1)
    local = m.new_end_array([0, 1, 2])
    assert local == 1
    assert all(EndId(p, 1) in m.ends for p in range(3))
    assert m.new_end(0) == EndId(0, 2)


@given(st.integers(0, 2**31 - 1), st.integers(0, 2**32 - 1))
def test_end_id_packs_into_one_word(proc, local):
    e = EndId(proc, local)
    assert 0 <= e.pack() < 2**64
    assert EndId.unpack(e.pack()) == e


# -- messaging -------------------------------------------------------------------


def pair(machine, src_proc=0, dst_proc=1):
    a, b = machine.new_end(src_proc), machine.new_end(dst_proc)
    return a, b


def test_send_receive_delivers_words():
    m = Machine()
    a, b = pair(m)
    got = []

    def sender():
        yield SetDest(a, b)
        yield Send(a, (7,))

    def receiver():
        got.append((yield Receive(b)))

    m.spawn(0, sender())
    m.spawn(1, receiver())
    ev = m.run()
    assert got == [(7,)]
    (recv,) = [e for e in ev if e.kind is EventKind.RECEIVE]
    assert (recv.src, recv.dst, recv.length, recv.data) == (a, b, 1, (7,))


def test_send_without_destination():
    m = Machine()
    a = m.new_end(0)

    def sender():
        yield Send(a, (1,))

    m.spawn(0, sender())
    with pytest.raises(E.NoDestination):
        m.run()


def test_redirected_destination():
    m = Machine()
    a, b, c = m.new_end(0), m.new_end(1), m.new_end(2)
    got = {b: [], c: []}

    def sender():
        yield SetDest(a, b)
        yield Send(a, (1,))
        yield SetDest(a, c)
        yield Send(a, (2,))
        yield Send(a, (3,))

    def receiver(end, n):
        for _ in range(n):
            got[end].append((yield Receive(end)))

    m.spawn(0, sender())
    m.spawn(1, receiver(b, 1))
    m.spawn(2, receiver(c, 2))
    m.run()
    assert got == {b: [(1,)], c: [(2,), (3,)]}


def test_loopback_echo():
    m = Machine()
    e = m.new_end(0)
    got = []

    def sender():
        yield SetDest(e, e)
        yield Send(e, (42,))

    def receiver():
        got.append((yield Receive(e)))

    m.spawn(0, sender())
    m.spawn(0, receiver())
    ev = m.run()
    assert got == [(42,)]
    (recv,) = [x for x in ev if x.kind is EventKind.RECEIVE]
    assert recv.src == recv.dst == e and recv.delay == 0


def test_self_rendezvous_in_one_thread_deadlocks():
    m = Machine()
    e = m.new_end(0)

    def both():
        yield SetDest(e, e)
        yield Send(e, (1,))
        yield Receive(e)

    m.spawn(0, both())
    with pytest.raises(E.DeadlockDetected):
        m.run()


@pytest.mark.parametrize("dst_proc, hop, want", [(0, 1, 0), (1, 1, 1), (1, 5, 5), (1, 0, 0)])
def test_latency(dst_proc, hop, want):
    m = Machine(MachineConfig(hop_latency=hop))
    a, b = pair(m, 0, dst_proc)

    def sender():
        yield SetDest(a, b)
        yield Send(a, (1,))

    def receiver():
        yield Receive(b)

    m.spawn(0, sender())
    m.spawn(dst_proc, receiver())
    ev = m.run()
    send = next(e for e in ev if e.kind is EventKind.SEND)
    recv = next(e for e in ev if e.kind is EventKind.RECEIVE)
    assert recv.delay == want and recv.time - send.time == want


def test_in_order_delivery():
    m = Machine()
    a, b = pair(m)
    got = []

    def sender():
        yield SetDest(a, b)
        yield Send(a, (1,))
        yield Send(a, (2,))

    def receiver():
        for _ in range(2):
            got.append((yield Receive(b)))

    m.spawn(0, sender())
    m.spawn(1, receiver())
    m.run()
    assert got == [(1,), (2,)]


@given(st.lists(st.lists(st.integers(0, 99), min_size=1, max_size=6), min_size=1, max_size=4),
       st.integers(0, 50))
def test_fifo_and_conservation(streams, seed):
    """Several senders into one end: each sender's words arrive in order and
    every Send has exactly one matching Receive."""
    m = Machine(MachineConfig(seed=seed, processors=8))
    dst = m.new_end(0)
    srcs = [m.new_end(1 + k) for k in range(len(streams))]
    got = []

    def sender(end, words):
        yield SetDest(end, dst)
        for w in words:
            yield Send(end, (w,))

    def receiver(total):
        for _ in range(total):
            w = yield Receive(dst)
            got.append(w[0])

    def root():
        entries = [(1 + k, sender(srcs[k], s), "s") for k, s in enumerate(streams)]
        entries.append((0, receiver(sum(map(len, streams))), "r"))
        tids = yield Spawn(entries)
        yield Join(tids)

    m.spawn(0, root())
    ev = m.run()
    sends = [e for e in ev if e.kind is EventKind.SEND]
    recvs = [e for e in ev if e.kind is EventKind.RECEIVE]
    assert len(sends) == len(recvs) == sum(map(len, streams))
    for k, s in enumerate(streams):
        assert [e.data[0] for e in recvs if e.src == srcs[k]] == s
        assert [e.data[0] for e in sends if e.src == srcs[k]] == s
    for s, r in zip(sends, recvs):
        assert s.seq < r.seq


# -- connections -----------------------------------------------------------------


def test_connect_free_end_is_accepted():
    m = Machine()
    s = m.new_end(0, capacity=1)
    c = m.new_end(1)
    out = []

    def client():
        yield SetDest(c, s)
        out.append((yield Connect(c)))
        yield Disconnect(c)

    m.spawn(1, client())
    ev = m.run()
    assert out == [ACCEPTED]
    assert kinds(ev, EventKind.CONNECT_REQUEST, EventKind.CONNECT_ACCEPT, EventKind.DISCONNECT) == [
        EventKind.CONNECT_REQUEST, EventKind.CONNECT_ACCEPT, EventKind.DISCONNECT]
    assert m.ends[s].peer is None


def connect_scenario(n_clients, capacity, hold=10):
    m = Machine(MachineConfig(processors=8))
    s = m.new_end(0, capacity=capacity)
    ends = [m.new_end(1 + k) for k in range(n_clients)]
    results: dict[int, str] = {}

    def client(k, delay):
        yield Sleep(delay) if delay else SetDest(ends[k], s)
        yield SetDest(ends[k], s)
        r = yield Connect(ends[k])
        results[k] = r
        if r != REJECTED:
            yield Sleep(hold)
            yield Disconnect(ends[k])

    for k in range(n_clients):
        m.spawn(1 + k, client(k, k))  # staggered so arrival order is k
    return m, s, ends, results


def test_second_client_is_queued_then_accepted():
    m, s, ends, results = connect_scenario(2, capacity=1)
    ev = m.run()
    assert results == {0: ACCEPTED, 1: QUEUED}
    accepts = [e for e in ev if e.kind is EventKind.CONNECT_ACCEPT]
    disc0 = next(e for e in ev if e.kind is EventKind.DISCONNECT and e.src == ends[0])
    assert [a.src for a in accepts] == [ends[0], ends[1]]
    assert accepts[1].seq > disc0.seq


def test_full_queue_rejects_third_client():
    m, s, ends, results = connect_scenario(3, capacity=1)
    ev = m.run()
    assert results == {0: ACCEPTED, 1: QUEUED, 2: REJECTED}
    rejects = [e for e in ev if e.kind is EventKind.CONNECT_REJECT]
    assert len(rejects) == 1 and rejects[0].src == ends[2]


def test_queued_waiters_accepted_in_request_order():
    m, s, ends, results = connect_scenario(4, capacity=3)
    ev = m.run()
    requests = [e.src for e in ev if e.kind is EventKind.CONNECT_REQUEST]
    accepts = [e.src for e in ev if e.kind is EventKind.CONNECT_ACCEPT]
    assert accepts == requests == ends


def test_disconnect_while_unconnected():
    m = Machine()
    s = m.new_end(0, capacity=1)
    c = m.new_end(1)

    def client():
        yield SetDest(c, s)
        yield Disconnect(c)

    m.spawn(1, client())
    with pytest.raises(E.NotConnected):
        m.run()


def test_message_from_unconnected_end_is_stray():
    m = Machine()
    s = m.new_end(0, capacity=1)
    c = m.new_end(1)

    def client():
        yield SetDest(c, s)
        yield Send(c, (1,))

    m.spawn(1, client())
    with pytest.raises(E.StrayMessage):
        m.run()


def test_connected_end_only_delivers_from_peer():
    """Exclusivity: a message from an end that connected later waits until it is the peer."""
    m = Machine(MachineConfig(processors=4))
    s = m.new_end(0, capacity=2)
    c1, c2 = m.new_end(1), m.new_end(2)
    got = []

    def client(c, word, delay):
        yield Sleep(delay) if delay else SetDest(c, s)
        yield SetDest(c, s)
        yield Connect(c)
        yield Send(c, (word,))
        yield Disconnect(c)

    def server():
        for _ in range(2):
            got.append((yield Receive(s)))

    m.spawn(0, server())
    m.spawn(1, client(c1, 1, 0))
    m.spawn(2, client(c2, 2, 1))
    ev = m.run()
    assert got == [(1,), (2,)]
    accept2 = next(e for e in ev if e.kind is EventKind.CONNECT_ACCEPT and e.src == c2)
    recv2 = next(e for e in ev if e.kind is EventKind.RECEIVE and e.src == c2)
    assert accept2.seq < recv2.seq


# -- runs --------------------------------------------------------------------------


def test_empty_program_trace():
    m = Machine()
    m.spawn(0, idle())
    assert kinds(m.run()) == [EventKind.THREAD_START, EventKind.THREAD_END]


def test_two_receivers_deadlock_with_two_cycle():
    m = Machine()
    a, b = pair(m)
    tids = {}

    def recv_from(end, other):
        yield Receive(end, lambda: [tids[other]])

    tids["x"] = m.spawn(0, recv_from(a, "y"), "x")
    tids["y"] = m.spawn(1, recv_from(b, "x"), "y")
    with pytest.raises(E.DeadlockDetected) as info:
        m.run()
    exc = info.value
    assert exc.wait_graph == {tids["x"]: [tids["y"]], tids["y"]: [tids["x"]]}
    assert sorted(exc.cycle()) == sorted(tids.values())
    assert exc.exit_status == 3


def scrambled(seed):
    m = Machine(MachineConfig(seed=seed))
    dst = m.new_end(0)
    srcs = [m.new_end(k) for k in range(1, 6)]

    def sender(end, w):
        yield SetDest(end, dst)
        yield Send(end, (w,))

    def receiver():
        for _ in srcs:
            yield Receive(dst)

    def root():
        tids = yield Spawn([(k + 1, sender(e, k), "s") for k, e in enumerate(srcs)] + [(0, receiver(), "r")])
        yield Join(tids)

    m.spawn(0, root())
    return format_trace(m.run())


def test_same_seed_same_trace():
    assert scrambled(3) == scrambled(3)


def test_seed_only_breaks_ties():
    traces = {scrambled(s) for s in range(10)}
    # delivery order depends on the seeded spawn order, so some seeds differ
    assert len(traces) > 1


def test_round_robin_fairness():
    """Busy threads that repeatedly reschedule each get a turn every round."""
    m = Machine()
    order = []

    def spinner(k):
        for _ in range(5):
            order.append(k)
            yield Sleep(1)

    for k in range(4):
        m.spawn(0, spinner(k))
    m.run()
    for r in range(5):
        assert sorted(order[4 * r:4 * r + 4]) == [0, 1, 2, 3]
