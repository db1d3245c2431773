"""Declarative trace patterns and the evidence matrices they produce.

A ruleset is a list of :class:`TracePattern` blocks. Each pattern is a
conjunction of attribute predicates over events from one log source, tagged
with the perspective (victim/attacker), level (host/network) and trace
category it evidences. :func:`build_evidence` runs every pattern over a corpus
and records, per host, which patterns found witnesses.
"""

from __future__ import annotations

import hashlib
import re
import shlex
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from importlib import resources
from typing import Iterable, Mapping

from .errors import BadPredicate, DuplicateId, InvalidPattern, MalformedIp, RuleSetError, UnknownKey
from .model import ATTRIBUTES, PORT_ATTRIBUTES, HostId, LogSource, NormalizedEvent, canonical_host


class Perspective(Enum):
    VICTIM = "VICTIM"
    ATTACKER = "ATTACKER"


class Level(Enum):
    HOST = "HOST"
    NETWORK = "NETWORK"


class Category(Enum):
    SCAN = "SCAN"
    EXPLOIT_BACKDOOR = "EXPLOIT_BACKDOOR"
    EXPLOIT_FTP = "EXPLOIT_FTP"
    EXPLOIT_TRANSFER = "EXPLOIT_TRANSFER"
    SECURITY = "SECURITY"
    IMPACT = "IMPACT"
    SYSTEM = "SYSTEM"
    APPLICATION = "APPLICATION"
    ACTIVITY = "ACTIVITY"
    ALARM = "ALARM"


EXPLOIT_CHAIN = (Category.SCAN, Category.EXPLOIT_BACKDOOR, Category.EXPLOIT_FTP,
                 Category.EXPLOIT_TRANSFER)


class Binding(Enum):
    OWNER = "OWNER"
    SRC_IP = "SRC_IP"
    DST_IP = "DST_IP"


class Op(Enum):
    EQ = "EQ"
    GLOB = "GLOB"
    PORT_CLASS = "PORT_CLASS"


_PORT_CLASS = re.compile(r"^(\d+)(x+)$")
DEFAULT_PORT_CLASSES = {"3xxx": (3000, 3999)}


@lru_cache(maxsize=None)
def _glob_regex(glob: str) -> re.Pattern:
    return re.compile(".*".join(re.escape(part) for part in glob.split("*")), re.DOTALL)


def port_class_span(symbol: str) -> tuple[int, int]:
    """Default range for a digit-prefix class: ``3xxx`` -> (3000, 3999)."""
    m = _PORT_CLASS.match(symbol)
    if not m:
        raise ValueError(f"not a port class: {symbol!r}")
    scale = 10 ** len(m.group(2))
    low = int(m.group(1)) * scale
    return low, low + scale - 1


@dataclass(frozen=True)
class AttrPredicate:
    attr: str
    op: Op
    value: str
    span: tuple[int, int] | None = None

    def __post_init__(self):
        if self.op is Op.PORT_CLASS and self.span is None:
            object.__setattr__(self, "span", port_class_span(self.value))

    def holds(self, attrs: Mapping[str, str]) -> bool:
        actual = attrs.get(self.attr)
        if actual is None:
            return False
        if self.op is Op.EQ:
            return actual == self.value
        if self.op is Op.GLOB:
            return _glob_regex(self.value).fullmatch(actual) is not None
        if not actual.isdigit():
            return False
        low, high = self.span
        return low <= int(actual) <= high

    def render(self) -> str:
        if self.op is Op.GLOB:
            value = "~" + self.value
        else:
            value = self.value
        return f"{self.attr}={shlex.quote(value) if ' ' in value else value}"


@dataclass(frozen=True)
class TracePattern:
    id: str
    perspective: Perspective
    level: Level
    category: Category
    source: LogSource
    predicates: tuple[AttrPredicate, ...] = ()
    host_binding: Binding = Binding.OWNER
    attributes: tuple[str, ...] = ()

    def __post_init__(self):
        if self.level is Level.HOST and self.host_binding is not Binding.OWNER:
            raise InvalidPattern(f"{self.id}: HOST-level patterns bind OWNER")
        if self.level is Level.NETWORK and self.host_binding is Binding.OWNER:
            raise InvalidPattern(f"{self.id}: NETWORK-level patterns bind SRC_IP or DST_IP")

    def matches(self, e: NormalizedEvent) -> bool:
        return e.source is self.source and all(p.holds(e.attrs) for p in self.predicates)


def match_event(p: TracePattern, e: NormalizedEvent) -> HostId | None:
    """Return the host the event evidences under ``p``, or None."""
    if not p.matches(e):
        return None
    if p.host_binding is Binding.OWNER:
        return e.host
    ip = e.get("src_ip" if p.host_binding is Binding.SRC_IP else "dst_ip")
    if ip is None:
        return None
    try:
        return canonical_host(ip)
    except MalformedIp:
        return None


@dataclass(frozen=True)
class RuleSet:
    patterns: tuple[TracePattern, ...]
    port_classes: Mapping[str, tuple[int, int]] = field(default_factory=dict)
    name: str = "custom"
    sha256: str = ""

    def __post_init__(self):
        seen = set()
        for p in self.patterns:
            if p.id in seen:
                raise DuplicateId(f"duplicate pattern id {p.id!r}")
            seen.add(p.id)
        perspectives = {p.perspective for p in self.patterns}
        if perspectives != set(Perspective):
            raise RuleSetError("a ruleset needs at least one VICTIM and one ATTACKER pattern")
        by_id = {p.id: p for p in self.patterns}
        by_category: dict[tuple, list[str]] = {}
        by_source: dict[LogSource, list[TracePattern]] = {}
        for p in self.patterns:
            by_category.setdefault((p.perspective, p.level, p.category), []).append(p.id)
            by_source.setdefault(p.source, []).append(p)
        object.__setattr__(self, "_ids", tuple(by_id))
        object.__setattr__(self, "_by_id", by_id)
        object.__setattr__(self, "_by_category", {k: tuple(v) for k, v in by_category.items()})
        object.__setattr__(self, "_by_source", {k: tuple(v) for k, v in by_source.items()})

    def __getitem__(self, pattern_id: str) -> TracePattern:
        return self._by_id[pattern_id]

    def __iter__(self):
        return iter(self.patterns)

    def __len__(self) -> int:
        return len(self.patterns)

    @property
    def ids(self) -> tuple[str, ...]:
        return self._ids

    def ids_for(self, perspective: Perspective, category: Category,
                level: Level | None = None) -> tuple[str, ...]:
        if level is not None:
            return self._by_category.get((perspective, level, category), ())
        return tuple(i for lv in Level for i in self._by_category.get((perspective, lv, category), ()))

    def categories(self) -> list[tuple[Perspective, Category]]:
        """Distinct (perspective, category) pairs in ruleset order."""
        out = []
        for p in self.patterns:
            key = (p.perspective, p.category)
            if key not in out:
                out.append(key)
        return out

    def for_source(self, source: LogSource) -> tuple[TracePattern, ...]:
        return self._by_source.get(source, ())

    def render(self) -> str:
        """Serialize back to the ruleset text format."""
        out = []
        for symbol, (low, high) in sorted(self.port_classes.items()):
            out.append(f"portclass {symbol} {low}-{high}")
        for p in self.patterns:
            out += ["", f"pattern {p.id}",
                    f"  perspective: {p.perspective.value}",
                    f"  level: {p.level.value}",
                    f"  category: {p.category.value}",
                    f"  source: {p.source.name}"]
            if p.host_binding is not Binding.OWNER:
                out.append(f"  bind: {p.host_binding.value}")
            out.append(("  match: " + " ".join(x.render() for x in p.predicates)).rstrip())
            if p.attributes:
                out.append("  attributes: " + " ".join(p.attributes))
        return "\n".join(out) + "\n"


_KEYS = {"perspective", "level", "category", "source", "match", "attributes", "bind"}
_REQUIRED = ("perspective", "level", "category", "source", "match")


def _split_terms(value: str, line_no: int) -> list[str]:
    lex = shlex.shlex(value, posix=True)
    lex.whitespace_split = True
    lex.escape = ""
    lex.commenters = ""
    try:
        return list(lex)
    except ValueError as exc:
        raise BadPredicate(str(exc), line_no) from None


def _predicate(term: str, port_classes: Mapping[str, tuple[int, int]], line_no: int) -> AttrPredicate:
    attr, sep, value = term.partition("=")
    if not sep or not attr:
        raise BadPredicate(f"expected attr=value, got {term!r}", line_no)
    if attr not in ATTRIBUTES:
        raise BadPredicate(f"unknown attribute {attr!r}", line_no)
    if value.startswith("~"):
        if not value[1:]:
            raise BadPredicate("empty glob", line_no)
        return AttrPredicate(attr, Op.GLOB, value[1:])
    if attr in PORT_ATTRIBUTES and _PORT_CLASS.match(value):
        span = port_classes.get(value) or port_class_span(value)
        return AttrPredicate(attr, Op.PORT_CLASS, value, span)
    if attr in PORT_ATTRIBUTES and not value.isdigit():
        raise BadPredicate(f"{attr} needs a port number or class, got {value!r}", line_no)
    return AttrPredicate(attr, Op.EQ, value)


def _enum(cls, value: str, key: str, line_no: int):
    try:
        return cls[value.strip().upper()]
    except KeyError:
        raise InvalidPattern(f"bad {key}: {value!r}", line_no) from None


def parse_ruleset(data: bytes | str, name: str = "custom") -> RuleSet:
    """Parse the ruleset text format (see ``data/default.rules``)."""
    raw = data if isinstance(data, bytes) else data.encode("utf-8")
    text = raw.decode("utf-8-sig")
    port_classes = dict(DEFAULT_PORT_CLASSES)
    blocks: list[tuple[str, int, dict[str, tuple[str, int]]]] = []
    seen: set[str] = set()
    for line_no, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if not line[0].isspace():
            head, *rest = stripped.split()
            if head == "pattern":
                if len(rest) != 1:
                    raise InvalidPattern("expected 'pattern <id>'", line_no)
                if rest[0] in seen:
                    raise DuplicateId(f"duplicate pattern id {rest[0]!r}", line_no)
                seen.add(rest[0])
                blocks.append((rest[0], line_no, {}))
            elif head == "portclass":
                m = re.fullmatch(r"(\d+x+)\s+(\d+)\s*-\s*(\d+)", " ".join(rest))
                if not m or int(m.group(2)) > int(m.group(3)) or int(m.group(3)) > 65535:
                    raise BadPredicate(f"bad portclass directive: {stripped!r}", line_no)
                port_classes[m.group(1)] = (int(m.group(2)), int(m.group(3)))
            else:
                raise UnknownKey(f"unknown directive {head!r}", line_no)
            continue
        if not blocks:
            raise InvalidPattern("indented line outside a pattern block", line_no)
        key, sep, value = stripped.partition(":")
        key = key.strip().lower()
        if not sep or key not in _KEYS:
            raise UnknownKey(f"unknown key {key!r}", line_no)
        blocks[-1][2][key] = (value.strip(), line_no)

    patterns = []
    for pid, line_no, kv in blocks:
        for key in _REQUIRED:
            if key not in kv:
                raise InvalidPattern(f"pattern {pid!r} lacks '{key}'", line_no)
        level = _enum(Level, kv["level"][0], "level", kv["level"][1])
        if "bind" in kv:
            binding = _enum(Binding, kv["bind"][0], "bind", kv["bind"][1])
        else:
            binding = Binding.OWNER
        try:
            source = LogSource[kv["source"][0].strip().upper()]
        except KeyError:
            raise InvalidPattern(f"bad source: {kv['source'][0]!r}", kv["source"][1]) from None
        match_value, match_line = kv["match"]
        preds = tuple(_predicate(t, port_classes, match_line) for t in _split_terms(match_value, match_line))
        attributes = tuple(kv["attributes"][0].split()) if "attributes" in kv else ()
        try:
            patterns.append(TracePattern(
                pid,
                _enum(Perspective, kv["perspective"][0], "perspective", kv["perspective"][1]),
                level,
                _enum(Category, kv["category"][0], "category", kv["category"][1]),
                source, preds, binding, attributes,
            ))
        except InvalidPattern as exc:
            raise InvalidPattern(str(exc), line_no) from None
    return RuleSet(tuple(patterns), port_classes, name, hashlib.sha256(raw).hexdigest())


def default_ruleset_text() -> bytes:
    return resources.files("wormtrace").joinpath("data/default.rules").read_bytes()


@lru_cache(maxsize=1)
def default_ruleset() -> RuleSet:
    return parse_ruleset(default_ruleset_text(), name="default")


# -------------------------------------------------------------------- evidence


@dataclass
class EvidenceMatrix:
    """Per-host grid: pattern id -> witnessing events (empty = not found)."""

    host: HostId
    rules: RuleSet
    cells: dict[str, tuple[NormalizedEvent, ...]]

    def found(self, pattern_id: str) -> bool:
        return bool(self.cells.get(pattern_id))

    def witnesses(self, pattern_id: str) -> tuple[NormalizedEvent, ...]:
        return self.cells.get(pattern_id, ())

    def found_ids(self) -> list[str]:
        return [pid for pid in self.rules.ids if self.cells.get(pid)]

    def grid(self) -> dict[str, bool]:
        return {pid: bool(self.cells.get(pid)) for pid in self.rules.ids}

    @classmethod
    def from_flags(cls, host: HostId, rules: RuleSet, flags: Mapping[str, bool],
                   witness: NormalizedEvent | None = None) -> EvidenceMatrix:
        """Synthetic matrix for tests and what-if analysis."""
        token = (witness,) if witness is not None else (None,)
        return cls(host, rules, {pid: token if flags.get(pid) else () for pid in rules.ids})


def build_evidence(events: Iterable[NormalizedEvent], rules: RuleSet) -> dict[HostId, EvidenceMatrix]:
    """Evaluate every pattern over the events; one matrix per involved host.

    A host is involved if it owns an event or is bound by a network pattern.
    Names from ``#Host:`` headers are attached to hosts that were only seen
    by address.
    """
    found: dict[HostId, dict[str, list[NormalizedEvent]]] = {}
    names: dict[str, str] = {}
    for e in events:
        if e.source is not LogSource.IDS_ALERT:
            found.setdefault(e.host, {})
            if e.host.name:
                names.setdefault(e.host.ip, e.host.name)
        for p in rules.for_source(e.source):
            host = match_event(p, e)
            if host is None:
                continue
            found.setdefault(host, {}).setdefault(p.id, []).append(e)

    out = {}
    for host in sorted(found, key=lambda h: h.sort_key):
        named = HostId(host.ip, names.get(host.ip, host.name))
        cells = {pid: tuple(found[host].get(pid, ())) for pid in rules.ids}
        out[named] = EvidenceMatrix(named, rules, cells)
    return out
