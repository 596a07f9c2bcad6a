"""Exception types shared across the policy engine and the simulator."""

from __future__ import annotations


class OsdfError(Exception):
    """Base class for every error raised by this package."""


class ParseError(OsdfError):
    """Malformed policy text.

    Carries the character offset of the first offending token and the set of
    tokens that would have been accepted there.
    """

    def __init__(self, position: int, expected: tuple[str, ...], found: str = ""):
        self.position = position
        self.expected = tuple(expected)
        self.found = found
        msg = f"expected {' or '.join(self.expected)} at position {position}"
        if found:
            msg += f", found {found!r}"
        super().__init__(msg)


class SemanticError(OsdfError):
    """Structurally valid input whose meaning is inconsistent."""


class UnknownApplicationError(SemanticError):
    """An application name with no registered match template."""


class DuplicateIdError(OsdfError):
    """A policy id that is already present in the store."""


class NotFoundError(OsdfError):
    """A policy id, host, switch, or region that does not exist."""


class FormatError(OsdfError):
    """A persisted file (store, config, or script) that cannot be decoded."""


class ValidationError(OsdfError):
    """A decodable configuration that violates a structural invariant."""


class UnresolvableHostError(OsdfError):
    """A policy host name that cannot be mapped to its region's host set."""

    def __init__(self, message: str, policy_id: int | None = None):
        self.policy_id = policy_id
        if policy_id is not None:
            message = f"policy {policy_id}: {message}"
        super().__init__(message)


class NoPathError(OsdfError):
    """No path satisfies the endpoints and waypoint constraints."""


class PolicyNotApplicableError(OsdfError):
    """A flow outside the policy's span or address space."""


class InvalidConflictClassError(OsdfError):
    """A resolution request for a pair that is not in conflict."""
