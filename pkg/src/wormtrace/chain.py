"""Attack-chain reconstruction.

Edges come from the exploit-chain witnesses already collected in the evidence
matrices: firewall 445/9996/5554/3xxx traces on either endpoint, and IDS
alerts that name both attacker and victim. An edge is complete when the worm
transfer (3xxx) was witnessed. Compromise levels are graph distances from the
origin attackers over complete edges.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, Mapping

from .classifier import COMPROMISED, HostClassification, Role
from .errors import MalformedIp
from .model import HostId, NormalizedEvent, canonical_host, event_order_key
from .patterns import EXPLOIT_CHAIN, Category, EvidenceMatrix, Level, Perspective

LEAF = "LEAF"


@dataclass(frozen=True)
class AttackEdge:
    src: HostId
    dst: HostId
    complete: bool
    first_seen: datetime
    witnesses: tuple[NormalizedEvent, ...]
    back_edge: bool = False

    @property
    def key(self) -> tuple:
        return (self.first_seen, self.src.sort_key, self.dst.sort_key)


@dataclass(frozen=True)
class ChainNode:
    host: HostId
    role: Role
    level: int | str | None  # int, LEAF, or None when unassigned


@dataclass(frozen=True)
class ChainDiagnostic:
    kind: str  # cycle | orphan | origin_inbound | temporal
    message: str


@dataclass
class AttackChain:
    nodes: dict[HostId, ChainNode]
    edges: list[AttackEdge]
    diagnostics: list[ChainDiagnostic] = field(default_factory=list)
    parents: dict[HostId, AttackEdge] = field(default_factory=dict)
    orphans: list[HostId] = field(default_factory=list)

    @property
    def has_cycle(self) -> bool:
        return any(e.back_edge for e in self.edges)

    def level(self, host: HostId) -> int | str | None:
        node = self.nodes.get(host)
        return node.level if node else None


def _other_end(e: NormalizedEvent, owner: HostId) -> str | None:
    src, dst = e.get("src_ip"), e.get("dst_ip")
    if src == owner.ip:
        return dst
    if dst == owner.ip:
        return src
    return None


def _pairs_for(host: HostId, m: EvidenceMatrix):
    """Yield (event, attacker_ip, victim_ip, is_transfer) for edge-bearing witnesses."""
    for pid in m.found_ids():
        p = m.rules[pid]
        if p.level is Level.HOST and p.category in EXPLOIT_CHAIN:
            transfer = p.category is Category.EXPLOIT_TRANSFER
            for e in m.witnesses(pid):
                other = _other_end(e, host)
                if other is None:
                    continue
                if p.perspective is Perspective.VICTIM:
                    yield e, other, host.ip, transfer
                else:
                    yield e, host.ip, other, transfer
        elif (p.level is Level.NETWORK and p.perspective is Perspective.VICTIM
              and p.category in (Category.ACTIVITY, Category.ALARM)):
            for e in m.witnesses(pid):
                src, dst = e.get("src_ip"), e.get("dst_ip")
                if src and dst:
                    yield e, src, dst, False


def extract_edges(events: Iterable[NormalizedEvent],
                  evidence: Mapping[HostId, EvidenceMatrix]) -> list[AttackEdge]:
    """One edge per (attacker, victim) pair, witnesses in event order."""
    known = {h.ip: h for h in evidence}
    index: dict[NormalizedEvent, list[tuple[str, str, bool]]] = {}
    for host, m in evidence.items():
        for e, a, v, transfer in _pairs_for(host, m):
            index.setdefault(e, []).append((a, v, transfer))

    def resolve(ip: str) -> HostId | None:
        if ip in known:
            return known[ip]
        try:
            return known.setdefault(ip, canonical_host(ip))
        except MalformedIp:
            return None

    acc: dict[tuple[str, str], dict] = {}
    ordered = list(events)
    ordered.sort(key=event_order_key)
    for e in ordered:
        for a, v, transfer in index.get(e, ()):
            if a == v:
                continue
            slot = acc.setdefault((a, v), {"witnesses": [], "complete": False})
            # one event can witness several patterns for the same pair
            if not slot["witnesses"] or slot["witnesses"][-1] != e:
                slot["witnesses"].append(e)
            slot["complete"] = slot["complete"] or transfer

    edges = []
    for (a, v), slot in acc.items():
        src, dst = resolve(a), resolve(v)
        if src is None or dst is None:
            continue
        wit = tuple(slot["witnesses"])
        edges.append(AttackEdge(src, dst, slot["complete"], wit[0].timestamp, wit))
    edges.sort(key=lambda x: (x.src.sort_key, x.dst.sort_key))
    return edges


def _mark_back_edges(hosts: list[HostId], complete: list[AttackEdge]) -> set[tuple[str, str]]:
    adj: dict[str, list[AttackEdge]] = {}
    for e in complete:
        adj.setdefault(e.src.ip, []).append(e)
    state: dict[str, int] = {}  # 1 = on stack, 2 = done
    back: set[tuple[str, str]] = set()
    for root in hosts:
        if root.ip in state:
            continue
        state[root.ip] = 1
        stack = [(root.ip, iter(adj.get(root.ip, ())))]
        while stack:
            ip, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                state[ip] = 2
                stack.pop()
                continue
            d = nxt.dst.ip
            if state.get(d) == 1:
                back.add((ip, d))
            elif d not in state:
                state[d] = 1
                stack.append((d, iter(adj.get(d, ()))))
    return back


def build_attack_chain(classes: Mapping[HostId, HostClassification],
                       edges: Iterable[AttackEdge]) -> AttackChain:
    edges = list(edges)
    roles = {h: c.role for h, c in classes.items()}
    for e in edges:
        roles.setdefault(e.src, Role.UNCLASSIFIED)
        roles.setdefault(e.dst, Role.UNCLASSIFIED)
    hosts = sorted(roles, key=lambda h: h.sort_key)
    diagnostics: list[ChainDiagnostic] = []

    complete = sorted((e for e in edges if e.complete), key=lambda x: x.key)
    origins = [h for h in hosts if roles[h] is Role.ORIGIN_ATTACKER]
    back = _mark_back_edges(origins + [h for h in hosts if h not in origins], complete)
    if back:
        edges = [AttackEdge(e.src, e.dst, e.complete, e.first_seen, e.witnesses,
                            (e.src.ip, e.dst.ip) in back) for e in edges]
        complete = sorted((e for e in edges if e.complete), key=lambda x: x.key)
        for a, b in sorted(back):
            diagnostics.append(ChainDiagnostic("cycle", f"cycle closed by edge {a} -> {b}"))

    outgoing: dict[HostId, list[AttackEdge]] = {}
    for e in complete:
        if not e.back_edge:
            outgoing.setdefault(e.src, []).append(e)

    # breadth-first, one layer at a time; within a layer the earliest edge wins
    levels: dict[HostId, int | str | None] = {h: 0 for h in origins}
    parents: dict[HostId, AttackEdge] = {}
    frontier, depth = origins, 0
    while frontier:
        depth += 1
        candidates = sorted((e for n in frontier for e in outgoing.get(n, ())), key=lambda x: x.key)
        frontier = []
        for e in candidates:
            if e.dst in levels or roles[e.dst] not in COMPROMISED:
                continue
            levels[e.dst] = depth
            parents[e.dst] = e
            frontier.append(e.dst)

    for h in hosts:
        if h in levels:
            continue
        levels[h] = LEAF if roles[h] is Role.VICTIM_ATTEMPTED else None

    complete_ends = {e.src for e in complete} | {e.dst for e in complete}
    orphans = []
    for h in hosts:
        if roles[h] is Role.ORIGIN_ATTACKER or isinstance(levels[h], int):
            continue
        if roles[h] in COMPROMISED or h in complete_ends:
            orphans.append(h)
            diagnostics.append(ChainDiagnostic(
                "orphan", f"{h.ip} ({roles[h].value}) is not reachable from any origin"))

    infected_at: dict[HostId, datetime] = {}
    for e in complete:
        if e.dst not in infected_at or e.first_seen < infected_at[e.dst]:
            infected_at[e.dst] = e.first_seen
    for h in origins:
        if h in infected_at:
            diagnostics.append(ChainDiagnostic(
                "origin_inbound", f"{h.ip} is an origin but has an inbound complete exploit"))
    for e in complete:
        t = infected_at.get(e.src)
        if t is not None and e.first_seen < t:
            diagnostics.append(ChainDiagnostic(
                "temporal", f"{e.src.ip} -> {e.dst.ip} starts before {e.src.ip} was infected"))

    nodes = {h: ChainNode(h, roles[h], levels[h]) for h in hosts}
    edges.sort(key=lambda x: (x.src.sort_key, x.dst.sort_key))
    return AttackChain(nodes, edges, diagnostics, parents, orphans)
