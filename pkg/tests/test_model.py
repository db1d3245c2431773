from datetime import datetime

import pytest
from hypothesis import given, strategies as st

from wormtrace.errors import MalformedIp
from wormtrace.model import (HostId, LogSource, NormalizedEvent, canonical_host, event_order_key,
                             sort_events)

T0 = datetime(2004, 5, 11, 10, 23, 1)


def ev(source=LogSource.FIREWALL, ts=T0, seq=0, host="192.112.112.200", **attrs):
    return NormalizedEvent(HostId(host), source, ts, seq, attrs)


def test_same_timestamp_firewall_before_ids():
    fw = ev(LogSource.FIREWALL)
    ids = ev(LogSource.IDS_ALERT, host="0.0.0.0")
    assert sorted([ids, fw], key=event_order_key) == [fw, ids]


def test_seq_breaks_ties():
    a, b = ev(seq=0), ev(seq=1)
    assert sorted([b, a], key=event_order_key) == [a, b]


def test_timestamp_is_primary_key():
    early = ev(LogSource.IDS_ALERT, ts=T0, host="0.0.0.0")
    late = ev(LogSource.FIREWALL, ts=T0.replace(second=2))
    assert sorted([late, early], key=event_order_key) == [early, late]


def test_source_rank_order():
    assert [k.rank for k in LogSource] == [0, 1, 2, 3, 4]
    assert LogSource.from_header("ids") is LogSource.IDS_ALERT


def test_canonical_host_named_pair():
    h = canonical_host("192.112.111.104", "Selamat")
    assert h.ip == "192.112.111.104" and h.name == "Selamat"


def test_canonical_host_strips_zeros():
    assert canonical_host("192.112.112.001").ip == "192.112.112.1"
    assert canonical_host("010.000.000.1").ip == "10.0.0.1"


@pytest.mark.parametrize("bad", ["not-an-ip", "1.2.3", "1.2.3.256", "1.2.3.4.5", "", "1.2.3.x"])
def test_canonical_host_rejects(bad):
    with pytest.raises(MalformedIp):
        canonical_host(bad)


def test_hostid_equality_ignores_name():
    assert HostId("10.0.0.1", "a") == HostId("10.0.0.1", "b")
    assert hash(HostId("10.0.0.1", "a")) == hash(HostId("10.0.0.1"))
    with pytest.raises(MalformedIp):
        HostId("10.0.0.01")


def test_event_rejects_unknown_attr_and_bad_port():
    with pytest.raises(ValueError):
        ev(colour="red")
    with pytest.raises(ValueError):
        ev(dst_port="70000")


def test_event_truncates_microseconds():
    e = ev(ts=T0.replace(microsecond=123))
    assert e.timestamp == T0


def test_events_immutable():
    e = ev(action="OPEN")
    with pytest.raises(TypeError):
        e.attrs["action"] = "CLOSE"


octet = st.integers(0, 255)


@given(st.tuples(octet, octet, octet, octet), st.integers(0, 2))
def test_canonical_host_idempotent(octets, pad):
    ip = ".".join(str(o).zfill(min(3, len(str(o)) + pad)) for o in octets)
    h = canonical_host(ip)
    assert canonical_host(h.ip) == h and canonical_host(h.ip).ip == h.ip


events_st = st.builds(
    lambda src, sec, seq, last, port: ev(src, T0.replace(second=sec), seq, f"10.0.0.{last}",
                                         dst_port=str(port)),
    st.sampled_from(list(LogSource)), st.integers(0, 3), st.integers(0, 3), st.integers(1, 3),
    st.integers(0, 3),
)


@given(st.lists(events_st, max_size=25), st.randoms())
def test_sort_is_permutation_invariant(events, rnd):
    shuffled = list(events)
    rnd.shuffle(shuffled)
    assert sort_events(shuffled) == sort_events(events)
