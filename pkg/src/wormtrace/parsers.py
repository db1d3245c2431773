"""Parsers for the on-disk log formats.

Every file opens with a header block of ``#Key: value`` directives:

* ``#Log:``  one of ``firewall``, ``security``, ``system``, ``application``, ``ids``
* ``#Host:`` ``<name> <ip>`` or ``<ip>``; required for host logs, forbidden for ``ids``
* ``#Year:`` four-digit year; required for ``ids`` (fast-alert lines carry no year)

Data line formats::

    firewall  2004-05-11 10:23:01 OPEN-INBOUND TCP 192.112.111.104 192.112.112.200 1055 445
    events    2004-05-11T10:23:05,592,C:\\WINDOWS\\system32\\ftp.exe,"A new process has been created"
    ids       05/11-10:23:02.000123 [**] [1:1:1] msg [**] [Priority: 1] {TCP} 1.2.3.4:1055 -> 5.6.7.8:445

Lines starting with ``#`` after the header block are comments. In lenient mode
(the default) a malformed line is recorded as a :class:`Diagnostic` and skipped;
in strict mode it raises :class:`MalformedLine`.
"""

from __future__ import annotations

import csv
import hashlib
import os
import re
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

from .errors import CorpusReadError, MalformedIp, MalformedLine, MissingHeader, UnknownLogKind
from .model import HostId, LogSource, NULL_HOST, NormalizedEvent, canonical_host, is_port, sort_events

EVENT_LOG_KINDS = (LogSource.SECURITY, LogSource.SYSTEM, LogSource.APPLICATION)

_DIRECTIVE = re.compile(r"^#\s*([A-Za-z]+)\s*:\s*(.*?)\s*$")
_FAST_ALERT = re.compile(
    r"^(?P<month>\d{2})/(?P<day>\d{2})-(?P<time>\d{2}:\d{2}:\d{2})(?:\.\d{1,6})?\s+"
    r"\[\*\*\]\s+\[\d+:\d+:\d+\]\s+(?P<msg>.+?)\s+\[\*\*\]"
    r"(?:\s+\[Classification:[^\]]*\])?"
    r"\s+\[Priority:\s*\d+\]\s+"
    r"\{(?P<proto>[A-Za-z0-9-]+)\}\s+"
    r"(?P<src>[\d.]+):(?P<sport>\d+)\s+->\s+(?P<dst>[\d.]+):(?P<dport>\d+)\s*$"
)


@dataclass(frozen=True)
class Diagnostic:
    """A line skipped by a lenient parse."""

    file: str
    line: int
    reason: str

    def __str__(self) -> str:
        return f"{self.file}:{self.line}: {self.reason}"


@dataclass(frozen=True)
class LogFile:
    path: str
    declared_kind: LogSource
    declared_host: HostId | None


def _decode(data: bytes | str) -> str:
    if isinstance(data, bytes):
        return data.decode("utf-8-sig")
    return data.lstrip("\ufeff")


def _split_header(lines: list[str]) -> tuple[dict[str, str], int]:
    """Read leading ``#`` lines; return directives and the index of the first body line."""
    directives: dict[str, str] = {}
    i = 0
    while i < len(lines) and lines[i].startswith("#"):
        m = _DIRECTIVE.match(lines[i])
        if m:
            directives.setdefault(m.group(1).lower(), m.group(2))
        i += 1
    return directives, i


def _parse_host_directive(value: str, path: str | None) -> HostId:
    parts = value.split()
    try:
        if len(parts) == 1:
            return canonical_host(parts[0])
        if len(parts) == 2:
            return canonical_host(parts[1], parts[0])
    except MalformedIp:
        pass
    raise MissingHeader(f"bad #Host directive: {value!r}", path)


def read_header(text: str, path: str | None = None) -> tuple[LogFile, list[str], int]:
    """Validate the header block. Returns (LogFile, all lines, first body index)."""
    lines = text.splitlines()
    directives, body = _split_header(lines)
    if "log" not in directives:
        raise MissingHeader("missing #Log: directive", path)
    try:
        kind = LogSource.from_header(directives["log"])
    except ValueError:
        raise UnknownLogKind(f"unknown log kind {directives['log']!r}", path) from None
    host = None
    if kind is LogSource.IDS_ALERT:
        if "host" in directives:
            raise MissingHeader("ids logs must not carry a #Host: directive", path)
        if "year" not in directives or not re.fullmatch(r"\d{4}", directives["year"]):
            raise MissingHeader("ids logs need a #Year: directive", path)
    else:
        if "host" not in directives:
            raise MissingHeader("missing #Host: directive", path)
        host = _parse_host_directive(directives["host"], path)
    return LogFile(path or "<memory>", kind, host), lines, body


class _LineSink:
    """Collects events and applies the strict/lenient policy to bad lines."""

    def __init__(self, path: str | None, strict: bool, diagnostics: list | None):
        self.path = path
        self.strict = strict
        self.diagnostics = diagnostics if diagnostics is not None else []
        self.events: list[NormalizedEvent] = []

    def reject(self, line_no: int, reason: str):
        if self.strict:
            raise MalformedLine(line_no, reason, self.path)
        self.diagnostics.append(Diagnostic(self.path or "<memory>", line_no, reason))


def _body(lines: list[str], start: int):
    for idx in range(start, len(lines)):
        line = lines[idx].strip()
        if not line or line.startswith("#"):
            continue
        yield idx + 1, line


def _check_kind(log: LogFile, expected: tuple[LogSource, ...], path: str | None):
    if log.declared_kind not in expected:
        names = "/".join(k.value for k in expected)
        raise UnknownLogKind(f"expected a {names} log, got {log.declared_kind.value!r}", path)


def _ip(value: str) -> str:
    return canonical_host(value).ip


def parse_firewall_log(data: bytes | str, *, path: str | None = None, strict: bool = False,
                       diagnostics: list | None = None) -> list[NormalizedEvent]:
    log, lines, start = read_header(_decode(data), path)
    _check_kind(log, (LogSource.FIREWALL,), path)
    sink = _LineSink(path, strict, diagnostics)
    for line_no, line in _body(lines, start):
        fields = line.split()
        if len(fields) != 8:
            sink.reject(line_no, f"expected 8 fields, got {len(fields)}")
            continue
        date, time, action, proto, src, dst, sport, dport = fields
        try:
            ts = datetime.strptime(f"{date} {time}", "%Y-%m-%d %H:%M:%S")
            src, dst = _ip(src), _ip(dst)
        except (ValueError, MalformedIp) as exc:
            sink.reject(line_no, str(exc))
            continue
        if not (is_port(sport) and is_port(dport)):
            sink.reject(line_no, "bad port")
            continue
        sink.events.append(NormalizedEvent(
            log.declared_host, LogSource.FIREWALL, ts, len(sink.events),
            {"action": action, "protocol": proto, "src_ip": src, "dst_ip": dst,
             "src_port": sport, "dst_port": dport},
        ))
    return sink.events


def parse_event_log(data: bytes | str, *, path: str | None = None, strict: bool = False,
                    diagnostics: list | None = None) -> list[NormalizedEvent]:
    log, lines, start = read_header(_decode(data), path)
    _check_kind(log, EVENT_LOG_KINDS, path)
    sink = _LineSink(path, strict, diagnostics)
    for line_no, line in _body(lines, start):
        try:
            row = next(csv.reader([line], strict=True))
        except csv.Error as exc:
            sink.reject(line_no, f"bad CSV: {exc}")
            continue
        if len(row) != 4:
            sink.reject(line_no, f"expected 4 CSV fields, got {len(row)}")
            continue
        stamp, event_id, image, message = row
        try:
            ts = datetime.strptime(stamp.strip(), "%Y-%m-%dT%H:%M:%S")
        except ValueError as exc:
            sink.reject(line_no, str(exc))
            continue
        event_id = event_id.strip()
        if not event_id.isdigit():
            sink.reject(line_no, f"event id is not numeric: {event_id!r}")
            continue
        attrs = {"event_id": event_id, "event_message": message}
        if image.strip():
            attrs["image_file_name"] = image.strip()
        sink.events.append(NormalizedEvent(
            log.declared_host, log.declared_kind, ts, len(sink.events), attrs))
    return sink.events


def parse_ids_alert_log(data: bytes | str, *, path: str | None = None, strict: bool = False,
                        diagnostics: list | None = None) -> list[NormalizedEvent]:
    text = _decode(data)
    log, lines, start = read_header(text, path)
    _check_kind(log, (LogSource.IDS_ALERT,), path)
    year = int(_split_header(lines)[0]["year"])
    sink = _LineSink(path, strict, diagnostics)
    for line_no, line in _body(lines, start):
        m = _FAST_ALERT.match(line)
        if not m:
            reason = "missing '->'" if "->" not in line else "not a fast-alert line"
            sink.reject(line_no, reason)
            continue
        try:
            ts = datetime.strptime(f"{year}/{m['month']}/{m['day']} {m['time']}", "%Y/%m/%d %H:%M:%S")
            src, dst = _ip(m["src"]), _ip(m["dst"])
        except (ValueError, MalformedIp) as exc:
            sink.reject(line_no, str(exc))
            continue
        if not (is_port(m["sport"]) and is_port(m["dport"])):
            sink.reject(line_no, "bad port")
            continue
        sink.events.append(NormalizedEvent(
            NULL_HOST, LogSource.IDS_ALERT, ts, len(sink.events),
            {"alert_message": m["msg"], "protocol": m["proto"], "src_ip": src,
             "src_port": m["sport"], "dst_ip": dst, "dst_port": m["dport"]},
        ))
    return sink.events


_DISPATCH = {
    LogSource.FIREWALL: parse_firewall_log,
    LogSource.SECURITY: parse_event_log,
    LogSource.SYSTEM: parse_event_log,
    LogSource.APPLICATION: parse_event_log,
    LogSource.IDS_ALERT: parse_ids_alert_log,
}


def parse_log(data: bytes | str, *, path: str | None = None, strict: bool = False,
              diagnostics: list | None = None) -> list[NormalizedEvent]:
    """Parse any supported log, dispatching on its ``#Log:`` header."""
    text = _decode(data)
    log, _, _ = read_header(text, path)
    return _DISPATCH[log.declared_kind](text, path=path, strict=strict, diagnostics=diagnostics)


@dataclass(frozen=True)
class CorpusFile:
    name: str
    kind: LogSource
    host: HostId | None
    sha256: str
    events: int


@dataclass
class Corpus:
    events: list[NormalizedEvent]
    diagnostics: list[Diagnostic]
    files: list[CorpusFile]

    def __iter__(self):
        # allows ``events, diagnostics = load_corpus(...)``
        return iter((self.events, self.diagnostics))


def load_corpus(paths, strict: bool = False) -> Corpus:
    """Parse every file and return events in canonical order plus diagnostics.

    File names in diagnostics are basenames so that reports do not depend on
    where the corpus lives on disk.
    """
    events: list[NormalizedEvent] = []
    diagnostics: list[Diagnostic] = []
    files: list[CorpusFile] = []
    for path in paths:
        path = os.fspath(path)
        try:
            raw = Path(path).read_bytes()
        except OSError as exc:
            raise CorpusReadError(path, exc) from exc
        name = os.path.basename(path)
        text = _decode(raw)
        log, _, _ = read_header(text, path)
        file_diags: list[Diagnostic] = []
        parsed = _DISPATCH[log.declared_kind](text, path=name, strict=strict, diagnostics=file_diags)
        events.extend(parsed)
        diagnostics.extend(file_diags)
        files.append(CorpusFile(name, log.declared_kind, log.declared_host,
                                hashlib.sha256(raw).hexdigest(), len(parsed)))
    files.sort(key=lambda f: (f.name, f.sha256))
    diagnostics.sort(key=lambda d: (d.file, d.line, d.reason))
    return Corpus(sort_events(events), diagnostics, files)


def discover_logs(directory) -> list[Path]:
    """All ``*.log`` files under a directory, sorted."""
    return sorted(p for p in Path(directory).rglob("*.log") if p.is_file())
