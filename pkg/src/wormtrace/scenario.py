"""Synthetic Sasser intrusion corpora.

A :class:`ScenarioSpec` scripts who attacks whom and whether each exploit ran
to completion. :func:`render_corpus` turns it into log text in the formats
read by :mod:`wormtrace.parsers` and :func:`generate_logs` writes it to disk
together with a manifest of the verdicts the engine is expected to reach.
Expected verdicts are derived from the script itself, never from the engine.

Per attack the generator emits, on both endpoints and the IDS sensor::

    SCANUPnP alert                     src -> dst:5000
    OPEN / OPEN-INBOUND 445            + NETBIOS Unicode share access, lsass exploit attempt
    OPEN / OPEN-INBOUND 9996           + SHELLCODE detected
    (complete only)
    dst OPEN 5554 -> src, src OPEN-INBOUND 5554, dst 592 ftp.exe
    src OPEN transfer_port -> dst, dst OPEN-INBOUND transfer_port
    dst 592 <rand>_up.exe, src 592 avserve2.exe
    dst 1074 + 1015 when emit_impact_events

Hosts that start infected always carry 1074/1015: their LSASS crash predates
the scripted attacks.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from enum import Enum
from pathlib import Path
from typing import NamedTuple

from .errors import InvalidParams, InvalidSpec
from .model import HostId, LogSource, NULL_HOST, NormalizedEvent, canonical_host

TRANSFER_RANGE = (3000, 3999)
EPHEMERAL_RANGE = (1025, 5000)
UPNP_PORT = 5000
PLACEHOLDER_NET = "192.0.2."  # TEST-NET-1; never logged
DEFAULT_BASE_TIME = datetime(2004, 5, 11, 10, 23, 0)

WORM_IMAGE = r"C:\WINDOWS\avserve2.exe"
FTP_IMAGE = r"C:\WINDOWS\system32\ftp.exe"
UP_IMAGE = r"C:\WINDOWS\system32\{}_up.exe"
PROCESS_CREATED = "A new process has been created"
SHUTDOWN_MSG = "system shutdown & restart"
LSASS_FAILED_MSG = "lsass.exe failed"

_SIGNATURES = {
    "SCANUPnP": ("1:1384:8", 2),
    "NETBIOS Unicode share access": ("1:538:15", 2),
    "NETBIOS lsass exploit attempt": ("1:2514:7", 1),
    "SHELLCODE detected": ("1:1390:6", 1),
}


class Outcome(Enum):
    COMPLETE = "COMPLETE"
    ATTEMPTED = "ATTEMPTED"


class Attack(NamedTuple):
    src: HostId
    dst: HostId
    outcome: Outcome


@dataclass(frozen=True)
class ScenarioSpec:
    hosts: tuple[tuple[HostId, bool], ...]
    attacks: tuple[Attack, ...]
    base_time: datetime = DEFAULT_BASE_TIME
    seed: int = 0
    transfer_port: int = 3127
    emit_impact_events: bool = False
    # onward scan+backdoor attempts at unlogged placeholder addresses
    probes: tuple[tuple[HostId, HostId], ...] = ()
    name: str = "custom"

    @property
    def host_ids(self) -> list[HostId]:
        return [h for h, _ in self.hosts]


def validate_spec(spec: ScenarioSpec) -> None:
    """Raise InvalidSpec unless every attacker is infected when it attacks."""
    ips = [h.ip for h, _ in spec.hosts]
    if len(set(ips)) != len(ips):
        raise InvalidSpec("duplicate host address")
    if not TRANSFER_RANGE[0] <= spec.transfer_port <= TRANSFER_RANGE[1]:
        raise InvalidSpec(f"transfer_port {spec.transfer_port} outside {TRANSFER_RANGE}")
    known = set(ips)
    infected = {h.ip for h, inf in spec.hosts if inf}
    for i, a in enumerate(spec.attacks):
        if a.src.ip not in known or a.dst.ip not in known:
            raise InvalidSpec(f"attack {i} references an unknown host")
        if a.src == a.dst:
            raise InvalidSpec(f"attack {i} targets its own source")
        if a.src.ip not in infected:
            raise InvalidSpec(f"attack {i}: {a.src.ip} attacks before being infected")
        if a.outcome is Outcome.COMPLETE:
            if a.dst.ip in infected:
                raise InvalidSpec(f"attack {i}: {a.dst.ip} is already infected")
            infected.add(a.dst.ip)
    for src, dst in spec.probes:
        if src.ip not in infected:
            raise InvalidSpec(f"probe from never-infected host {src.ip}")
        if dst.ip in known:
            raise InvalidSpec(f"probe target {dst.ip} is a logged host")


# ------------------------------------------------------------------ built-ins

SELAMAT = HostId("192.112.111.104", "Selamat")
ROSLAN = HostId("192.112.112.200", "Roslan")
YUSOF = HostId("192.112.111.102", "Yusof")
RAMLY = HostId("192.112.112.196", "Ramly")
SAHIB = HostId("192.112.110.144", "Sahib")
TARMIZI = HostId("192.112.110.182", "Tarmizi")


def _placeholder(n: int) -> HostId:
    return HostId(f"{PLACEHOLDER_NET}{n}")


def builtin_scenario(which: str, seed: int = 0) -> ScenarioSpec:
    """The three recorded Sasser intrusions (A, B, C)."""
    which = which.upper()
    port = random.Random(f"transfer:{which}:{seed}").randint(*TRANSFER_RANGE)
    C, T = Outcome.COMPLETE, Outcome.ATTEMPTED
    if which == "A":
        hosts = ((SELAMAT, True), (ROSLAN, False), (YUSOF, False))
        attacks = (Attack(SELAMAT, ROSLAN, C), Attack(SELAMAT, YUSOF, T))
        probes = ((ROSLAN, _placeholder(1)),)
        impact = False
    elif which == "B":
        hosts = ((SELAMAT, True), (RAMLY, False), (ROSLAN, False))
        attacks = (Attack(SELAMAT, RAMLY, C), Attack(SELAMAT, ROSLAN, T), Attack(RAMLY, ROSLAN, C))
        probes = ((ROSLAN, _placeholder(1)),)
        impact = False
    elif which == "C":
        hosts = ((SELAMAT, True), (SAHIB, False), (TARMIZI, False))
        attacks = (Attack(SELAMAT, SAHIB, C), Attack(SELAMAT, TARMIZI, T), Attack(SAHIB, TARMIZI, C))
        probes = ()
        impact = True
    else:
        raise InvalidParams(f"unknown scenario {which!r}; expected A, B or C")
    return ScenarioSpec(hosts, attacks, DEFAULT_BASE_TIME, seed, port, impact, probes, which)


def random_scenario(n_hosts: int, n_attacks: int, seed: int) -> ScenarioSpec:
    """A valid random propagation script.

    Targets are drawn from hosts not yet infected, so the attack list stops
    early once every host is infected.
    """
    if not 2 <= n_hosts <= 254:
        raise InvalidParams("n_hosts must be in [2, 254]")
    if n_attacks < 1:
        raise InvalidParams("n_attacks must be >= 1")
    rng = random.Random(seed)
    slots = rng.sample([(net, last) for net in (110, 111, 112) for last in range(1, 255)], n_hosts)
    hosts = [HostId(f"192.112.{net}.{last}", f"host{i:02d}") for i, (net, last) in enumerate(slots)]
    n_origins = 2 if n_hosts > 2 and rng.random() < 0.2 else 1
    infected = list(hosts[:n_origins])
    attacks = []
    for _ in range(n_attacks):
        pending = [h for h in hosts if h not in infected]
        if not pending:
            break
        src = rng.choice(infected)
        dst = rng.choice(pending)
        outcome = Outcome.COMPLETE if rng.random() < 0.5 else Outcome.ATTEMPTED
        attacks.append(Attack(src, dst, outcome))
        if outcome is Outcome.COMPLETE:
            infected.append(dst)
    attackers = {a.src for a in attacks}
    probes = []
    for h in infected[n_origins:]:
        if h not in attackers and rng.random() < 0.25:
            probes.append((h, _placeholder(len(probes) + 1)))
    spec = ScenarioSpec(
        tuple((h, i < n_origins) for i, h in enumerate(hosts)),
        tuple(attacks),
        DEFAULT_BASE_TIME,
        seed,
        rng.randint(*TRANSFER_RANGE),
        rng.random() < 0.5,
        tuple(probes),
        "random",
    )
    validate_spec(spec)
    return spec


# ------------------------------------------------------------------ rendering


def file_stem(host: HostId) -> str:
    return (host.name or host.ip.replace(".", "-")).lower()


def _quoted(value: str) -> str:
    return '"' + value.replace('"', '""') + '"'


def _csv_field(value: str) -> str:
    return _quoted(value) if any(c in value for c in ',"\r\n') else value


@dataclass
class _Writer:
    rng: random.Random
    files: dict[str, list[str]] = field(default_factory=dict)
    events: list[NormalizedEvent] = field(default_factory=list)
    counts: dict[str, int] = field(default_factory=dict)

    def _emit(self, fname: str, line: str, host: HostId, source: LogSource, ts: datetime, attrs: dict):
        self.files[fname].append(line)
        seq = self.counts.get(fname, 0)
        self.counts[fname] = seq + 1
        self.events.append(NormalizedEvent(host, source, ts, seq, attrs))

    def port(self) -> str:
        return str(self.rng.randint(*EPHEMERAL_RANGE))

    def firewall(self, owner: HostId, ts: datetime, action: str, src: HostId, dst: HostId,
                 sport: str, dport: int):
        line = f"{ts:%Y-%m-%d %H:%M:%S} {action} TCP {src.ip} {dst.ip} {sport} {dport}"
        self._emit(f"{file_stem(owner)}_firewall.log", line, owner, LogSource.FIREWALL, ts,
                   {"action": action, "protocol": "TCP", "src_ip": src.ip, "dst_ip": dst.ip,
                    "src_port": sport, "dst_port": str(dport)})

    def eventlog(self, owner: HostId, kind: LogSource, ts: datetime, event_id: int,
                 image: str, message: str):
        line = f"{ts:%Y-%m-%dT%H:%M:%S},{event_id},{_csv_field(image)},{_quoted(message)}"
        attrs = {"event_id": str(event_id), "event_message": message}
        if image:
            attrs["image_file_name"] = image
        self._emit(f"{file_stem(owner)}_{kind.value}.log", line, owner, kind, ts, attrs)

    def alert(self, ts: datetime, message: str, src: HostId, dst: HostId, dport: int):
        sid, prio = _SIGNATURES[message]
        sport = self.port()
        micro = self.rng.randrange(1_000_000)
        line = (f"{ts:%m/%d-%H:%M:%S}.{micro:06d} [**] [{sid}] {message} [**] "
                f"[Priority: {prio}] {{TCP}} {src.ip}:{sport} -> {dst.ip}:{dport}")
        self._emit("ids_alert.log", line, NULL_HOST, LogSource.IDS_ALERT, ts,
                   {"alert_message": message, "protocol": "TCP", "src_ip": src.ip,
                    "src_port": sport, "dst_ip": dst.ip, "dst_port": str(dport)})


@dataclass
class RenderedCorpus:
    files: dict[str, str]
    events: list[NormalizedEvent]


def render_corpus(spec: ScenarioSpec) -> RenderedCorpus:
    """Log text for every file plus the events a correct parser must recover."""
    validate_spec(spec)
    w = _Writer(random.Random(spec.seed))
    for host, _ in spec.hosts:
        host_line = f"#Host: {host.name} {host.ip}" if host.name else f"#Host: {host.ip}"
        for kind in (LogSource.FIREWALL, LogSource.SECURITY, LogSource.SYSTEM, LogSource.APPLICATION):
            w.files[f"{file_stem(host)}_{kind.value}.log"] = [f"#Log: {kind.value}", host_line]
    w.files["ids_alert.log"] = ["#Log: ids", f"#Year: {spec.base_time.year}"]

    clock = [spec.base_time]

    def tick() -> datetime:
        clock[0] += timedelta(seconds=1)
        return clock[0]

    def impact(host: HostId, ts: datetime):
        w.eventlog(host, LogSource.SYSTEM, ts, 1074, "", SHUTDOWN_MSG)
        w.eventlog(host, LogSource.APPLICATION, ts, 1015, "", LSASS_FAILED_MSG)

    t0 = spec.base_time
    for host, infected in spec.hosts:
        if infected:
            impact(host, t0)

    for a in spec.attacks:
        src, dst = a.src, a.dst
        w.alert(tick(), "SCANUPnP", src, dst, UPNP_PORT)
        ts = tick()
        sport = w.port()
        w.firewall(src, ts, "OPEN", src, dst, sport, 445)
        w.firewall(dst, ts, "OPEN-INBOUND", src, dst, sport, 445)
        w.alert(ts, "NETBIOS Unicode share access", src, dst, 445)
        w.alert(tick(), "NETBIOS lsass exploit attempt", src, dst, 445)
        ts = tick()
        w.alert(ts, "SHELLCODE detected", src, dst, 445)
        sport = w.port()
        w.firewall(src, ts, "OPEN", src, dst, sport, 9996)
        w.firewall(dst, ts, "OPEN-INBOUND", src, dst, sport, 9996)
        if a.outcome is not Outcome.COMPLETE:
            continue
        ts = tick()
        sport = w.port()
        w.firewall(dst, ts, "OPEN", dst, src, sport, 5554)
        w.firewall(src, ts, "OPEN-INBOUND", dst, src, sport, 5554)
        w.eventlog(dst, LogSource.SECURITY, ts, 592, FTP_IMAGE, PROCESS_CREATED)
        ts = tick()
        sport = w.port()
        w.firewall(src, ts, "OPEN", src, dst, sport, spec.transfer_port)
        w.firewall(dst, ts, "OPEN-INBOUND", src, dst, sport, spec.transfer_port)
        ts = tick()
        w.eventlog(dst, LogSource.SECURITY, ts, 592, UP_IMAGE.format(w.rng.randint(1000, 9999)), PROCESS_CREATED)
        w.eventlog(src, LogSource.SECURITY, ts, 592, WORM_IMAGE, PROCESS_CREATED)
        if spec.emit_impact_events:
            impact(dst, tick())

    for src, dst in spec.probes:
        ts = tick()
        w.alert(ts, "SCANUPnP", src, dst, UPNP_PORT)
        w.firewall(src, ts, "OPEN", src, dst, w.port(), 445)
        w.firewall(src, tick(), "OPEN", src, dst, w.port(), 9996)

    files = {name: "\n".join(lines) + "\n" for name, lines in sorted(w.files.items())}
    return RenderedCorpus(files, w.events)


# ------------------------------------------------------------------- manifest


def expected_verdicts(spec: ScenarioSpec) -> dict[str, dict]:
    """Role and level per host, replayed from the script."""
    attackers = {a.src.ip for a in spec.attacks} | {s.ip for s, _ in spec.probes}
    inbound: dict[str, set[Outcome]] = {}
    for a in spec.attacks:
        inbound.setdefault(a.dst.ip, set()).add(a.outcome)

    involved = {h.ip for h, inf in spec.hosts if inf} | attackers | set(inbound)
    roles = {}
    for host, _ in spec.hosts:
        if host.ip not in involved:
            continue
        got = inbound.get(host.ip, set())
        attacker = host.ip in attackers
        if Outcome.COMPLETE in got:
            role = "MULTI_STEP" if attacker else "VICTIM_EXPLOITED"
        elif got:
            role = "UNCLASSIFIED" if attacker else "VICTIM_ATTEMPTED"
        else:
            role = "ORIGIN_ATTACKER" if attacker else "UNCLASSIFIED"
        roles[host.ip] = role

    # each host is infected at most once, so levels follow the script order
    levels: dict[str, int | str | None] = {ip: 0 for ip, r in roles.items() if r == "ORIGIN_ATTACKER"}
    for a in spec.attacks:
        if a.outcome is Outcome.COMPLETE and isinstance(levels.get(a.src.ip), int):
            levels[a.dst.ip] = levels[a.src.ip] + 1
    out = {}
    names = {h.ip: h.name for h, _ in spec.hosts}
    for ip, role in roles.items():
        if role == "VICTIM_ATTEMPTED":
            level = "LEAF"
        elif role in ("ORIGIN_ATTACKER", "MULTI_STEP", "VICTIM_EXPLOITED"):
            level = levels.get(ip)
        else:
            level = None
        out[ip] = {"name": names[ip], "role": role, "level": level}
    return out


def expected_edges(spec: ScenarioSpec) -> list[dict]:
    pairs: dict[tuple[str, str], bool] = {}
    for a in spec.attacks:
        key = (a.src.ip, a.dst.ip)
        pairs[key] = pairs.get(key, False) or a.outcome is Outcome.COMPLETE
    for src, dst in spec.probes:
        pairs.setdefault((src.ip, dst.ip), False)
    return [{"src": s, "dst": d, "complete": c} for (s, d), c in sorted(pairs.items())]


def spec_to_dict(spec: ScenarioSpec) -> dict:
    return {
        "name": spec.name,
        "seed": spec.seed,
        "base_time": spec.base_time.isoformat(),
        "transfer_port": spec.transfer_port,
        "emit_impact_events": spec.emit_impact_events,
        "hosts": [{"ip": h.ip, "name": h.name, "initially_infected": inf} for h, inf in spec.hosts],
        "attacks": [{"src": a.src.ip, "dst": a.dst.ip, "outcome": a.outcome.value} for a in spec.attacks],
        "probes": [{"src": s.ip, "dst": d.ip} for s, d in spec.probes],
    }


def spec_from_dict(data: dict) -> ScenarioSpec:
    hosts = [(canonical_host(h["ip"], h.get("name")), bool(h["initially_infected"])) for h in data["hosts"]]
    by_ip = {h.ip: h for h, _ in hosts}
    spec = ScenarioSpec(
        tuple(hosts),
        tuple(Attack(by_ip[a["src"]], by_ip[a["dst"]], Outcome(a["outcome"])) for a in data["attacks"]),
        datetime.fromisoformat(data["base_time"]),
        int(data["seed"]),
        int(data["transfer_port"]),
        bool(data["emit_impact_events"]),
        tuple((by_ip[p["src"]], canonical_host(p["dst"])) for p in data.get("probes", ())),
        data.get("name", "custom"),
    )
    validate_spec(spec)
    return spec


def build_manifest(spec: ScenarioSpec, rendered: RenderedCorpus) -> dict:
    notes = []
    if spec.probes:
        notes.append("probes: compromised hosts emit outbound 445/9996 firewall traces and a "
                     "SCANUPnP alert toward unlogged placeholder addresses (192.0.2.0/24); no "
                     "445 IDS alerts are emitted for them, so placeholders get no verdict")
    notes.append("initially infected hosts always carry 1074/1015 events; other hosts only "
                 "when emit_impact_events is set")
    return {
        "format": "wormtrace-manifest/1",
        "scenario": spec_to_dict(spec),
        "files": [
            {"name": name, "sha256": hashlib.sha256(text.encode()).hexdigest()}
            for name, text in sorted(rendered.files.items())
        ],
        "expected": {"classifications": expected_verdicts(spec), "edges": expected_edges(spec)},
        "notes": notes,
    }


def generate_logs(spec: ScenarioSpec, out_dir) -> dict:
    """Write the corpus and ``manifest.json`` into ``out_dir``; return the manifest."""
    rendered = render_corpus(spec)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in rendered.files.items():
        with open(out / name, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    manifest = build_manifest(spec, rendered)
    with open(out / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
