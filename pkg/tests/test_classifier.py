import pytest
from hypothesis import given, strategies as st

from wormtrace.classifier import (ExploitStatus, Role, attacker_evidence, classify_all, classify_host,
                                  exploit_completeness)
from wormtrace.errors import MissingCategory
from wormtrace.model import sort_events
from wormtrace.patterns import EvidenceMatrix, build_evidence, default_ruleset, parse_ruleset
from wormtrace.scenario import (RAMLY, ROSLAN, SAHIB, SELAMAT, TARMIZI, YUSOF, builtin_scenario,
                                render_corpus)

RULES = default_ruleset()
H = SELAMAT
VICTIM_CHAIN = ["victim.scan", "victim.exploit.backdoor", "victim.exploit.ftp", "victim.exploit.transfer"]
ATTACKER_CHAIN = ["attacker.scan", "attacker.exploit.backdoor", "attacker.exploit.ftp",
                  "attacker.exploit.transfer"]


def matrix(*found):
    return EvidenceMatrix.from_flags(H, RULES, {pid: True for pid in found})


def classes(which):
    events = sort_events(render_corpus(builtin_scenario(which)).events)
    return classify_all(build_evidence(events, RULES))


def test_complete():
    assert exploit_completeness(matrix(*VICTIM_CHAIN)) is ExploitStatus.COMPLETE


def test_attempted():
    assert exploit_completeness(matrix(*VICTIM_CHAIN[:2])) is ExploitStatus.ATTEMPTED


def test_none():
    assert exploit_completeness(matrix()) is ExploitStatus.NONE
    assert exploit_completeness(matrix("victim.scan")) is ExploitStatus.NONE


def test_transfer_without_ftp_is_none():
    # backdoor open and code transferred, but no FTP pull: neither definition applies
    m = matrix("victim.scan", "victim.exploit.backdoor", "victim.exploit.transfer")
    assert exploit_completeness(m) is ExploitStatus.NONE


def test_attacker_evidence():
    assert attacker_evidence(matrix(*ATTACKER_CHAIN))
    assert not attacker_evidence(matrix("attacker.scan"))
    assert not attacker_evidence(matrix(*VICTIM_CHAIN))


def test_corroborations_exclude_required():
    found = VICTIM_CHAIN + ATTACKER_CHAIN + ["victim.system.shutdown", "attacker.activity.scanupnp"]
    c = classify_host(matrix(*found))
    assert c.role is Role.MULTI_STEP
    assert c.corroborations == ("victim.system.shutdown", "attacker.exploit.ftp",
                                "attacker.exploit.transfer", "attacker.activity.scanupnp")


def test_all_false_unclassified():
    c = classify_host(matrix())
    assert (c.role, c.exploit_status, c.attacker_evidence, c.corroborations) == \
        (Role.UNCLASSIFIED, ExploitStatus.NONE, False, ())


def test_scenario_b_ramly():
    assert classes("B")[RAMLY].role is Role.MULTI_STEP


def test_scenario_a():
    got = classes("A")
    assert got[SELAMAT].role is Role.ORIGIN_ATTACKER
    assert got[YUSOF].role is Role.VICTIM_ATTEMPTED
    assert got[ROSLAN].role is Role.MULTI_STEP


def test_scenario_c():
    got = classes("C")
    assert {h.name: c.role for h, c in got.items()} == {
        "Selamat": Role.ORIGIN_ATTACKER, "Sahib": Role.MULTI_STEP, "Tarmizi": Role.VICTIM_EXPLOITED}
    assert [h.ip for h in got] == sorted((h.ip for h in got), key=lambda ip: tuple(map(int, ip.split("."))))


def test_classify_all_empty():
    assert classify_all({}) == {}


def _without(*ids):
    text = RULES.render()
    blocks = text.split("\npattern ")
    keep = [b for b in blocks if b.split("\n", 1)[0] not in ids]
    return parse_ruleset("\npattern ".join(keep))


def test_missing_category():
    rules = _without("victim.exploit.ftp")
    m = EvidenceMatrix.from_flags(TARMIZI, rules, {})
    with pytest.raises(MissingCategory) as info:
        classify_all({TARMIZI: m})
    assert info.value.category == "EXPLOIT_FTP" and info.value.host == TARMIZI.ip
    assert "EXPLOIT_FTP" in str(info.value)


def test_missing_attacker_category():
    rules = _without("attacker.scan")
    with pytest.raises(MissingCategory, match="SCAN"):
        attacker_evidence(EvidenceMatrix.from_flags(SAHIB, rules, {}))


flags = st.fixed_dictionaries({pid: st.booleans() for pid in RULES.ids})


@given(flags)
def test_monotone_escalation(f):
    m = EvidenceMatrix.from_flags(H, RULES, f)
    if classify_host(m).role is not Role.VICTIM_EXPLOITED:
        return
    boosted = dict(f, **{"attacker.scan": True, "attacker.exploit.backdoor": True})
    assert classify_host(EvidenceMatrix.from_flags(H, RULES, boosted)).role is Role.MULTI_STEP


@given(flags)
def test_role_partition(f):
    c = classify_host(EvidenceMatrix.from_flags(H, RULES, f))
    s, a = c.exploit_status, c.attacker_evidence
    holds = {
        Role.MULTI_STEP: s is ExploitStatus.COMPLETE and a,
        Role.ORIGIN_ATTACKER: a and s is ExploitStatus.NONE,
        Role.VICTIM_EXPLOITED: s is ExploitStatus.COMPLETE and not a,
        Role.VICTIM_ATTEMPTED: s is ExploitStatus.ATTEMPTED and not a,
    }
    holds[Role.UNCLASSIFIED] = not any(holds.values())
    assert sum(holds.values()) == 1
    assert holds[c.role]


@given(flags)
def test_corroborations_are_found_cells(f):
    c = classify_host(EvidenceMatrix.from_flags(H, RULES, f))
    assert set(c.corroborations) <= {k for k, v in f.items() if v}
