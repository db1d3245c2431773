import json

import pytest
from corpus_tools import strip_transfer, write_files
from hypothesis import given, settings, strategies as st

from wormtrace.errors import InvalidParams, InvalidSpec
from wormtrace.model import HostId
from wormtrace.report import run_analysis
from wormtrace.scenario import (ROSLAN, SELAMAT, YUSOF, Attack, Outcome, ScenarioSpec, builtin_scenario,
                                generate_logs, random_scenario, render_corpus, spec_from_dict,
                                spec_to_dict)


def replay_ok(spec):
    """Independent check: every attacker is infected at the moment it attacks."""
    infected = {h.ip for h, inf in spec.hosts if inf}
    for a in spec.attacks:
        if a.src.ip not in infected:
            return False
        if a.outcome is Outcome.COMPLETE:
            infected.add(a.dst.ip)
    return True


def test_builtin_a():
    spec = builtin_scenario("A")
    assert len(spec.hosts) == 3 and len(spec.attacks) == 2
    assert [h for h, inf in spec.hosts if inf] == [SELAMAT]


def test_builtin_b_roslan_targeted_twice():
    outcomes = {a.outcome for a in builtin_scenario("B").attacks if a.dst == ROSLAN}
    assert outcomes == {Outcome.COMPLETE, Outcome.ATTEMPTED}


def test_builtin_impact_only_c():
    assert [builtin_scenario(w).emit_impact_events for w in "ABC"] == [False, False, True]


def test_builtin_unknown():
    with pytest.raises(InvalidParams):
        builtin_scenario("D")


def test_transfer_port_in_class():
    for seed in range(20):
        assert 3000 <= builtin_scenario("B", seed).transfer_port <= 3999


def test_manifest_a(tmp_path):
    m = generate_logs(builtin_scenario("A"), tmp_path)
    got = {v["name"]: (v["role"], v["level"]) for v in m["expected"]["classifications"].values()}
    assert got == {"Selamat": ("ORIGIN_ATTACKER", 0), "Roslan": ("MULTI_STEP", 1),
                   "Yusof": ("VICTIM_ATTEMPTED", "LEAF")}
    assert json.loads((tmp_path / "manifest.json").read_text()) == m
    assert m["notes"]


def test_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    generate_logs(builtin_scenario("C", seed=9), a)
    generate_logs(builtin_scenario("C", seed=9), b)
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    assert all((a / n).read_bytes() == (b / n).read_bytes() for n in names)


def test_seed_changes_bytes():
    assert render_corpus(builtin_scenario("A", 1)).files != render_corpus(builtin_scenario("A", 2)).files


def test_timestamps_strictly_increase_per_attack():
    events = render_corpus(builtin_scenario("B")).events
    firsts = []
    for e in events:
        if e.get("alert_message") == "SCANUPnP":
            firsts.append(e.timestamp)
    assert firsts == sorted(set(firsts))


def _spec(attacks, **kw):
    hosts = ((SELAMAT, True), (ROSLAN, False), (YUSOF, False))
    return ScenarioSpec(hosts, tuple(attacks), **kw)


def test_invalid_spec_uninfected_src():
    with pytest.raises(InvalidSpec):
        render_corpus(_spec([Attack(ROSLAN, YUSOF, Outcome.COMPLETE)]))


def test_invalid_spec_after_attempt_only():
    with pytest.raises(InvalidSpec):
        render_corpus(_spec([Attack(SELAMAT, ROSLAN, Outcome.ATTEMPTED), Attack(ROSLAN, YUSOF, Outcome.ATTEMPTED)]))


def test_invalid_spec_port_and_hosts():
    with pytest.raises(InvalidSpec):
        render_corpus(_spec([], transfer_port=4000))
    with pytest.raises(InvalidSpec):
        render_corpus(_spec([Attack(SELAMAT, HostId("10.9.9.9"), Outcome.COMPLETE)]))
    with pytest.raises(InvalidSpec):
        render_corpus(_spec([Attack(SELAMAT, SELAMAT, Outcome.ATTEMPTED)]))


def test_random_minimal():
    spec = random_scenario(2, 1, 7)
    assert sum(inf for _, inf in spec.hosts) == 1
    assert len(spec.attacks) == 1


def test_random_deterministic():
    assert random_scenario(9, 14, 123) == random_scenario(9, 14, 123)


def test_random_replay_5_8_42():
    spec = random_scenario(5, 8, 42)
    assert spec.attacks
    assert replay_ok(spec)


@pytest.mark.parametrize("args", [(1, 1, 0), (255, 1, 0), (3, 0, 0)])
def test_random_invalid_params(args):
    with pytest.raises(InvalidParams):
        random_scenario(*args)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 30), st.integers(1, 40), st.integers(0, 2**63))
def test_random_always_valid(n, k, seed):
    spec = random_scenario(n, k, seed)
    assert replay_ok(spec)
    assert 1 <= len(spec.attacks) <= k
    assert spec_from_dict(json.loads(json.dumps(spec_to_dict(spec)))) == spec


def _verdicts(files, tmp_path):
    write_files(files, tmp_path)
    r = run_analysis([tmp_path])
    return {h.ip: (c.role.value, r.level(h.ip)) for h, c in r.classifications.items()}


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32))
def test_degradation(tmp_path_factory, seed):
    spec = random_scenario(6, 8, seed)
    sinks = [a for a in spec.attacks if a.outcome is Outcome.COMPLETE
             and all(x.src != a.dst for x in spec.attacks) and all(s != a.dst for s, _ in spec.probes)]
    if not sinks:
        return
    target = sinks[0]
    files = render_corpus(spec).files
    base = tmp_path_factory.mktemp("deg")
    before = _verdicts(files, base / "before")
    after = _verdicts(strip_transfer(files, target, spec.transfer_port), base / "after")
    assert before[target.dst.ip] == ("VICTIM_EXPLOITED", before[target.dst.ip][1])
    assert after[target.dst.ip] == ("VICTIM_ATTEMPTED", "LEAF")
    del before[target.dst.ip], after[target.dst.ip]
    assert before == after
