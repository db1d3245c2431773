"""Worm trace correlation: parse host and network logs, match Sasser trace
patterns, classify host roles and rebuild the attack chain."""

from .chain import LEAF, AttackChain, AttackEdge, build_attack_chain, extract_edges
from .classifier import (ExploitStatus, HostClassification, Role, attacker_evidence, classify_all,
                         classify_host, exploit_completeness)
from .model import HostId, LogSource, NormalizedEvent, canonical_host, event_order_key
from .parsers import (Diagnostic, load_corpus, parse_event_log, parse_firewall_log,
                      parse_ids_alert_log, parse_log)
from .patterns import (EvidenceMatrix, RuleSet, TracePattern, build_evidence, default_ruleset,
                       match_event, parse_ruleset)
from .report import AnalysisReport, report_dot, report_json, run_analysis
from .scenario import ScenarioSpec, builtin_scenario, generate_logs, random_scenario

__version__ = "0.1.0"
