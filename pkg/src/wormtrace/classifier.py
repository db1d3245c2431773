"""Role verdicts from evidence matrices.

Host-level firewall categories decide the role; everything else found on the
host (security/system/application events, IDS alerts, the remaining firewall
categories) is reported as corroboration.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping, NamedTuple

from .errors import MissingCategory
from .model import HostId
from .patterns import EXPLOIT_CHAIN, Category, EvidenceMatrix, Level, Perspective, RuleSet


class ExploitStatus(Enum):
    NONE = "NONE"
    ATTEMPTED = "ATTEMPTED"
    COMPLETE = "COMPLETE"


class Role(Enum):
    ORIGIN_ATTACKER = "ORIGIN_ATTACKER"
    VICTIM_EXPLOITED = "VICTIM_EXPLOITED"
    VICTIM_ATTEMPTED = "VICTIM_ATTEMPTED"
    MULTI_STEP = "MULTI_STEP"
    UNCLASSIFIED = "UNCLASSIFIED"


COMPROMISED = (Role.MULTI_STEP, Role.VICTIM_EXPLOITED)


class HostClassification(NamedTuple):
    host: HostId
    role: Role
    exploit_status: ExploitStatus
    attacker_evidence: bool
    corroborations: tuple[str, ...] = ()


def _category_ids(rules: RuleSet, perspective: Perspective, category: Category) -> tuple[str, ...]:
    ids = rules.ids_for(perspective, category, Level.HOST)
    if not ids:
        raise MissingCategory(perspective.value, category.value)
    return ids


@dataclass(frozen=True)
class _Plan:
    """Required-category pattern ids for one ruleset, precomputed once."""

    victim: tuple[tuple[str, ...], ...]
    attacker: tuple[tuple[str, ...], ...]
    consumed: Mapping[tuple[ExploitStatus, bool], frozenset]


def _plan(rules: RuleSet) -> _Plan:
    cached = rules.__dict__.get("_classifier_plan")
    if cached is None:
        victim = tuple(_category_ids(rules, Perspective.VICTIM, c) for c in EXPLOIT_CHAIN)
        attacker = tuple(_category_ids(rules, Perspective.ATTACKER, c) for c in EXPLOIT_CHAIN[:2])
        by_status = {
            ExploitStatus.COMPLETE: frozenset().union(*victim),
            ExploitStatus.ATTEMPTED: frozenset().union(*victim[:2]),
            ExploitStatus.NONE: frozenset(),
        }
        outbound = frozenset().union(*attacker)
        consumed = {(s, a): ids | outbound if a else ids for s, ids in by_status.items() for a in (False, True)}
        cached = _Plan(victim, attacker, consumed)
        object.__setattr__(rules, "_classifier_plan", cached)
    return cached


def _status(scan: bool, backdoor: bool, ftp: bool, transfer: bool) -> ExploitStatus:
    if scan and backdoor and ftp and transfer:
        return ExploitStatus.COMPLETE
    if scan and backdoor and not transfer:
        return ExploitStatus.ATTEMPTED
    return ExploitStatus.NONE


def _victim_status(plan: _Plan, get) -> ExploitStatus:
    v = plan.victim
    return _status(any(map(get, v[0])), any(map(get, v[1])), any(map(get, v[2])), any(map(get, v[3])))


def _attacker(plan: _Plan, get) -> bool:
    a = plan.attacker
    return any(map(get, a[0])) and any(map(get, a[1]))


def exploit_completeness(m: EvidenceMatrix) -> ExploitStatus:
    return _victim_status(_plan(m.rules), m.cells.get)


def attacker_evidence(m: EvidenceMatrix) -> bool:
    """True when the host initiated an outbound exploit (445 scan plus 9996 shell)."""
    return _attacker(_plan(m.rules), m.cells.get)


_ROLES = {
    (ExploitStatus.COMPLETE, True): Role.MULTI_STEP,
    (ExploitStatus.COMPLETE, False): Role.VICTIM_EXPLOITED,
    (ExploitStatus.ATTEMPTED, True): Role.UNCLASSIFIED,
    (ExploitStatus.ATTEMPTED, False): Role.VICTIM_ATTEMPTED,
    (ExploitStatus.NONE, True): Role.ORIGIN_ATTACKER,
    (ExploitStatus.NONE, False): Role.UNCLASSIFIED,
}


def classify_host(m: EvidenceMatrix) -> HostClassification:
    rules = m.rules
    plan = rules.__dict__.get("_classifier_plan") or _plan(rules)
    get = m.cells.get
    # exploit_completeness and attacker_evidence inlined; this is a hot path
    scan, backdoor, ftp, transfer = [any(map(get, ids)) for ids in plan.victim]
    if scan and backdoor:
        status = ExploitStatus.ATTEMPTED if not transfer else (
            ExploitStatus.COMPLETE if ftp else ExploitStatus.NONE)
    else:
        status = ExploitStatus.NONE
    outbound_scan, outbound_backdoor = plan.attacker
    attacker = any(map(get, outbound_scan)) and any(map(get, outbound_backdoor))
    key = (status, attacker)
    consumed = plan.consumed[key]
    corroborations = tuple([i for i in filter(get, rules.ids) if i not in consumed])
    return HostClassification(m.host, _ROLES[key], status, attacker, corroborations)


def classify_all(evidence: Mapping[HostId, EvidenceMatrix]) -> dict[HostId, HostClassification]:
    out = {}
    for host in sorted(evidence, key=lambda h: h.sort_key):
        try:
            out[host] = classify_host(evidence[host])
        except MissingCategory as exc:
            raise MissingCategory(exc.perspective, exc.category, host.ip) from None
    return out
