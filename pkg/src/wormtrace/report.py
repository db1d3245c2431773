"""Analysis pipeline and report serialization (JSON, DOT, text)."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

from .chain import LEAF, AttackChain, build_attack_chain, extract_edges
from .classifier import HostClassification, classify_all
from .model import HostId, LogSource
from .parsers import CorpusFile, Diagnostic, discover_logs, load_corpus
from .patterns import EvidenceMatrix, RuleSet, build_evidence, default_ruleset, parse_ruleset

REPORT_FORMAT = "wormtrace-report/1"
RULESET_ENV = "WORMTRACE_RULESET"

COMPLETE_LABEL = "445,9996,5554,3xxx"
ATTEMPT_LABEL = "445,9996"


@dataclass
class AnalysisReport:
    files: list[CorpusFile]
    event_counts: dict[str, int]
    diagnostics: list[Diagnostic]
    evidence: dict[HostId, EvidenceMatrix]
    classifications: dict[HostId, HostClassification]
    chain: AttackChain
    rules: RuleSet

    @property
    def hosts(self) -> list[HostId]:
        return sorted(self.classifications, key=lambda h: h.sort_key)

    def by_ip(self, ip: str) -> HostClassification:
        return self.classifications[HostId(ip)]

    def level(self, ip: str):
        return self.chain.level(HostId(ip))


def expand_paths(paths) -> list[Path]:
    out: list[Path] = []
    for p in paths:
        p = Path(p)
        out.extend(discover_logs(p) if p.is_dir() else [p])
    return out


def load_rules(ruleset=None) -> RuleSet:
    """Explicit path, else $WORMTRACE_RULESET, else the built-in ruleset."""
    path = ruleset or os.environ.get(RULESET_ENV)
    if not path:
        return default_ruleset()
    return parse_ruleset(Path(path).read_bytes(), name=os.path.basename(path))


def run_analysis(paths, ruleset=None, strict: bool = False) -> AnalysisReport:
    rules = ruleset if isinstance(ruleset, RuleSet) else load_rules(ruleset)
    corpus = load_corpus(expand_paths(paths), strict=strict)
    evidence = build_evidence(corpus.events, rules)
    classes = classify_all(evidence)
    edges = extract_edges(corpus.events, evidence)
    chain = build_attack_chain(classes, edges)
    counts = {kind.value: 0 for kind in LogSource}
    for e in corpus.events:
        counts[e.source.value] += 1
    return AnalysisReport(corpus.files, counts, corpus.diagnostics, evidence, classes, chain, rules)


def _level(value):
    return value if value is None or value == LEAF else int(value)


def report_dict(r: AnalysisReport) -> dict:
    hosts = {}
    for host, m in r.evidence.items():
        hosts[host.ip] = {
            "name": host.name,
            "evidence": m.grid(),
            "witnesses": {pid: [e.ref for e in w] for pid, w in m.cells.items() if w},
        }
    classifications = {}
    for host, c in r.classifications.items():
        classifications[host.ip] = {
            "name": host.name,
            "role": c.role.value,
            "level": _level(r.chain.level(host)),
            "exploit_status": c.exploit_status.value,
            "attacker_evidence": c.attacker_evidence,
            "corroborations": list(c.corroborations),
        }
    chain = r.chain
    return {
        "format": REPORT_FORMAT,
        "ruleset": {"name": r.rules.name, "sha256": r.rules.sha256, "patterns": list(r.rules.ids)},
        "corpus": {
            "files": [
                {"name": f.name, "kind": f.kind.value, "host": f.host.ip if f.host else None,
                 "sha256": f.sha256, "events": f.events}
                for f in r.files
            ],
            "event_counts": r.event_counts,
            "diagnostics": [{"file": d.file, "line": d.line, "reason": d.reason} for d in r.diagnostics],
        },
        "hosts": hosts,
        "classifications": classifications,
        "chain": {
            "nodes": {
                h.ip: {"name": n.host.name, "role": n.role.value, "level": _level(n.level)}
                for h, n in chain.nodes.items()
            },
            "edges": [
                {"src": e.src.ip, "dst": e.dst.ip, "complete": e.complete,
                 "first_seen": e.first_seen.isoformat(), "witnesses": len(e.witnesses),
                 "back_edge": e.back_edge}
                for e in chain.edges
            ],
            "orphans": [h.ip for h in chain.orphans],
            "diagnostics": [{"kind": d.kind, "message": d.message} for d in chain.diagnostics],
        },
    }


def report_json(r: AnalysisReport) -> bytes:
    return (json.dumps(report_dict(r), indent=2, sort_keys=True, ensure_ascii=False) + "\n").encode("utf-8")


def _dot_str(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def report_dot(r: AnalysisReport) -> bytes:
    chain = r.chain
    lines = ["digraph attack_chain {", "  rankdir=LR;", "  node [shape=box];"]
    for host in sorted(chain.nodes, key=lambda h: h.sort_key):
        node = chain.nodes[host]
        parts = [p for p in (node.host.name, host.ip, node.role.value) if p]
        label = "\\n".join(p.replace("\\", "\\\\").replace('"', '\\"') for p in parts)
        lines.append(f'  "{host.ip}" [label="{label}"];')
    for e in sorted(chain.edges, key=lambda x: (x.src.sort_key, x.dst.sort_key)):
        style = "solid" if e.complete else "dashed"
        label = COMPLETE_LABEL if e.complete else ATTEMPT_LABEL
        extra = ", color=red" if e.back_edge else ""
        lines.append(f'  "{e.src.ip}" -> "{e.dst.ip}" [style={style}, label={_dot_str(label)}{extra}];')
    lines.append("}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def report_text(r: AnalysisReport) -> str:
    """Human-readable summary for the terminal."""
    out = [f"{sum(r.event_counts.values())} events from {len(r.files)} files, "
           f"{len(r.diagnostics)} skipped lines"]
    if r.classifications:
        out.append("")
        out.append(f"{'host':<16} {'name':<12} {'role':<17} level")
        for host, c in r.classifications.items():
            level = r.chain.level(host)
            out.append(f"{host.ip:<16} {host.name or '-':<12} {c.role.value:<17} "
                       f"{'-' if level is None else level}")
    if r.chain.edges:
        out.append("")
        for e in r.chain.edges:
            kind = "exploited" if e.complete else "attempted"
            out.append(f"{e.src.label} -> {e.dst.label}  {kind}  (first seen {e.first_seen:%Y-%m-%d %H:%M:%S})")
    for d in r.chain.diagnostics:
        out.append(f"warning: {d.kind}: {d.message}")
    return "\n".join(out)
