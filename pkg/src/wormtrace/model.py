"""Unified event representation shared by the parsers and the matching engine.

Every log line, whatever its on-disk format, becomes a :class:`NormalizedEvent`.
Events are immutable and carry a total ordering key so that a corpus sorts to
the same sequence no matter which order its files were read in.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from types import MappingProxyType
from typing import Mapping

from .errors import MalformedIp

ATTRIBUTES = frozenset(
    {
        "action",
        "protocol",
        "src_ip",
        "dst_ip",
        "src_port",
        "dst_port",
        "event_id",
        "image_file_name",
        "event_message",
        "alert_message",
    }
)
PORT_ATTRIBUTES = ("src_port", "dst_port")

_QUAD = re.compile(r"^(\d{1,3})\.(\d{1,3})\.(\d{1,3})\.(\d{1,3})$")


class LogSource(Enum):
    """The five log kinds, in canonical tie-break order."""

    FIREWALL = "firewall"
    SECURITY = "security"
    SYSTEM = "system"
    APPLICATION = "application"
    IDS_ALERT = "ids"

    @property
    def rank(self) -> int:
        return _SOURCE_RANK[self]

    @classmethod
    def from_header(cls, value: str) -> LogSource:
        return cls(value.strip().lower())


_SOURCE_RANK = {kind: i for i, kind in enumerate(LogSource)}


def ip_key(ip: str) -> tuple[int, ...]:
    """Numeric sort key for a canonical dotted-quad."""
    return tuple(int(part) for part in ip.split("."))


@dataclass(frozen=True)
class HostId:
    """A host, identified by IPv4 address. ``name`` is decorative."""

    ip: str
    name: str | None = field(default=None, compare=False)

    def __post_init__(self):
        m = _QUAD.match(self.ip)
        if not m or any(int(g) > 255 for g in m.groups()):
            raise MalformedIp(self.ip)
        if any(len(g) > 1 and g.startswith("0") for g in m.groups()):
            raise MalformedIp(self.ip)

    @property
    def sort_key(self) -> tuple[int, ...]:
        return ip_key(self.ip)

    @property
    def label(self) -> str:
        return f"{self.name} ({self.ip})" if self.name else self.ip

    def __str__(self) -> str:
        return self.ip


def canonical_host(ip: str, name: str | None = None) -> HostId:
    """Build a HostId, stripping leading zeros from each octet."""
    m = _QUAD.match(ip.strip()) if isinstance(ip, str) else None
    if not m:
        raise MalformedIp(ip)
    octets = [int(g) for g in m.groups()]
    if any(o > 255 for o in octets):
        raise MalformedIp(ip)
    return HostId(".".join(map(str, octets)), name or None)


# IDS alerts are recorded by a sensor that owns no host.
NULL_HOST = HostId("0.0.0.0")


@dataclass(frozen=True)
class NormalizedEvent:
    host: HostId
    source: LogSource
    timestamp: datetime
    seq: int
    attrs: Mapping[str, str] = field(default_factory=dict, hash=False)

    def __post_init__(self):
        unknown = set(self.attrs) - ATTRIBUTES
        if unknown:
            raise ValueError(f"unrecognized attributes: {sorted(unknown)}")
        for name in PORT_ATTRIBUTES:
            port = self.attrs.get(name)
            if port is not None and not is_port(port):
                raise ValueError(f"{name} is not a port: {port!r}")
        if self.seq < 0:
            raise ValueError("seq must be non-negative")
        if self.timestamp.microsecond:
            object.__setattr__(self, "timestamp", self.timestamp.replace(microsecond=0))
        object.__setattr__(self, "attrs", MappingProxyType(dict(self.attrs)))

    def get(self, attr: str) -> str | None:
        return self.attrs.get(attr)

    @property
    def ref(self) -> str:
        """Short stable reference, e.g. ``firewall@192.112.112.200#3``."""
        return f"{self.source.value}@{self.host.ip}#{self.seq}"


def is_port(value: str) -> bool:
    return value.isdigit() and int(value) <= 65535 and value == str(int(value))


def event_order_key(e: NormalizedEvent) -> tuple:
    """Total order: timestamp, source rank, seq, then owning host and attrs.

    The trailing host/attr components only break ties between events from
    different files that share timestamp, source and seq.
    """
    return (
        e.timestamp,
        e.source.rank,
        e.seq,
        e.host.sort_key,
        tuple(sorted(e.attrs.items())),
    )


def sort_events(events) -> list[NormalizedEvent]:
    return sorted(events, key=event_order_key)
