"""Exception hierarchy for wormtrace."""

from __future__ import annotations


class WormTraceError(Exception):
    """Base class for every error raised by this package."""


class MalformedIp(WormTraceError, ValueError):
    def __init__(self, value: str):
        super().__init__(f"not a dotted-quad IPv4 address: {value!r}")
        self.value = value


class ParseError(WormTraceError):
    """A log file could not be parsed."""

    def __init__(self, message: str, path: str | None = None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class MissingHeader(ParseError):
    pass


class UnknownLogKind(ParseError):
    pass


class MalformedLine(ParseError):
    def __init__(self, line_no: int, reason: str, path: str | None = None):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}", path)


class CorpusReadError(WormTraceError):
    def __init__(self, path: str, cause: BaseException):
        super().__init__(f"cannot read {path}: {cause}")
        self.path = path


class RuleSetError(WormTraceError):
    """A ruleset file is invalid."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}" if line_no else message)


class DuplicateId(RuleSetError):
    pass


class UnknownKey(RuleSetError):
    pass


class BadPredicate(RuleSetError):
    pass


class InvalidPattern(RuleSetError):
    pass


class MissingCategory(WormTraceError):
    """The ruleset lacks a category the classifier depends on."""

    def __init__(self, perspective: str, category: str, host: str | None = None):
        self.perspective = perspective
        self.category = category
        self.host = host
        msg = f"ruleset has no {perspective} {category} pattern"
        if host:
            msg = f"{host}: {msg}"
        super().__init__(msg)


class InvalidSpec(WormTraceError):
    pass


class InvalidParams(WormTraceError, ValueError):
    pass
