"""
Exception hierarchy shared by every layer.
Validation problems are reported as data (see scene_model.Violation); these
exceptions cover inputs that cannot be processed at all.
"""
from typing import Optional


class ZoneKitError(Exception):
    """Base class for all zonekit failures."""


class ConfigError(ZoneKitError):
    pass


# ── Scene text / JSON ────────────────────────────────────────────────────────

class NoAnswerFound(ZoneKitError):
    pass


class SceneParseError(ZoneKitError):
    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{message} at {path or '/'}")


class JsonSyntax(SceneParseError):
    pass


class SchemaMissingField(SceneParseError):
    def __init__(self, path: str):
        super().__init__("missing required field", path)


class SchemaBadType(SceneParseError):
    def __init__(self, path: str, expected: str):
        self.expected = expected
        super().__init__(f"expected {expected}", path)


class UnknownRelation(SceneParseError):
    def __init__(self, value: object, path: str = ""):
        self.value = value
        super().__init__(f"unknown relation {value!r}", path)


# ── Geometry ─────────────────────────────────────────────────────────────────

class DegeneratePolygon(ZoneKitError):
    pass


class NotRectilinear(ZoneKitError):
    pass


class BadDims(ZoneKitError):
    pass


# ── Optimisation ─────────────────────────────────────────────────────────────

class GroupTooSmall(ZoneKitError):
    pass


class LengthMismatch(ZoneKitError):
    pass


class MissingRatios(ZoneKitError):
    pass


class MissingKl(ZoneKitError):
    pass


class EmptyScene(ZoneKitError):
    pass


class EmptyCorpus(ZoneKitError):
    pass


def describe(exc: BaseException) -> str:
    """One-line `Kind: message` string used in reports and CLI output."""
    text: Optional[str] = str(exc) or None
    return f"{type(exc).__name__}: {text}" if text else type(exc).__name__
