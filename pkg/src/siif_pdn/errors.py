"""Exception hierarchy shared by every stage of the PDN flow."""

from __future__ import annotations


class PdnError(Exception):
    """Base class for all model and solver errors."""


class ConfigError(PdnError):
    """Malformed or out-of-range user configuration."""


class ValidationError(ConfigError):
    """One or more named fields violate their invariants.

    ``errors`` holds every ``(field, message)`` pair found, not just the first.
    """

    def __init__(self, errors: list[tuple[str, str]]):
        self.errors = list(errors)
        joined = "; ".join(f"{name}: {msg}" for name, msg in self.errors)
        super().__init__(joined or "validation failed")

    @property
    def fields(self) -> list[str]:
        return [name for name, _ in self.errors]


class CatalogError(ConfigError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its argument otherwise
        return str(self.args[0]) if self.args else "catalog error"


class DomainError(PdnError, ValueError):
    """An argument lies outside the domain where a formula is valid."""


class PlacementError(PdnError):
    pass


class BuildError(PdnError):
    pass


class TopologyError(PdnError):
    """Netlist graph is disconnected or has floating nodes."""


class NumericalError(PdnError):
    pass


class ParseError(PdnError):
    def __init__(self, lineno: int, message: str):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")
