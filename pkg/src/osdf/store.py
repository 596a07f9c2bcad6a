"""The set of active policies: runtime CRUD plus line-oriented persistence.

The store file is UTF-8 text with one policy per line, ``<id> <canonical
statement>``, LF-terminated.  It is written with render_policy and read
back with parse_policy, so a saved store is human-diffable and editable.
"""

from __future__ import annotations

import threading
from pathlib import Path

from .errors import DuplicateIdError, FormatError, NotFoundError
from .policy import (
    ApplicationRegistry,
    OperationKind,
    Policy,
    Span,
    parse_policy,
    render_policy,
)


class PolicyStore:
    """Active policies keyed by id, with a monotonically increasing revision.

    Mutations are serialized behind one lock; iteration order is always
    sorted by id.  Ids are assigned sequentially unless the caller supplies
    one.
    """

    def __init__(self) -> None:
        self._policies: dict[int, Policy] = {}
        self._revision = 0
        self._next_id = 1
        self._lock = threading.Lock()

    @property
    def revision(self) -> int:
        return self._revision

    def __len__(self) -> int:
        return len(self._policies)

    def __contains__(self, policy_id: int) -> bool:
        return policy_id in self._policies

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PolicyStore):
            return NotImplemented
        return self._policies == other._policies

    def ids(self) -> list[int]:
        return sorted(self._policies)

    def policies(self) -> list[Policy]:
        return [self._policies[i] for i in self.ids()]

    def get(self, policy_id: int) -> Policy:
        try:
            return self._policies[policy_id]
        except KeyError:
            raise NotFoundError(f"no policy with id {policy_id}") from None

    def add(self, policy: Policy, policy_id: int | None = None) -> int:
        """Insert a policy and return its id.

        The effective id is the explicit argument if given, else the
        policy's own id, else the next sequential id.
        """
        with self._lock:
            effective = policy_id if policy_id is not None else policy.id
            if effective is None:
                effective = self._next_id
            if effective in self._policies:
                raise DuplicateIdError(f"policy id {effective} already present")
            self._policies[effective] = policy.with_id(effective)
            self._next_id = max(self._next_id, effective + 1)
            self._revision += 1
            return effective

    def remove(self, policy_id: int) -> Policy:
        with self._lock:
            try:
                removed = self._policies.pop(policy_id)
            except KeyError:
                raise NotFoundError(f"no policy with id {policy_id}") from None
            self._revision += 1
            return removed

    def replace(self, policy_id: int, policy: Policy) -> None:
        """Swap the policy stored under an existing id."""
        with self._lock:
            if policy_id not in self._policies:
                raise NotFoundError(f"no policy with id {policy_id}")
            self._policies[policy_id] = policy.with_id(policy_id)
            self._revision += 1

    def filter_by_operation(self, kind: OperationKind, span: Span | None = None) -> list[Policy]:
        """Policies whose operation matches the given class, in id order."""
        return [
            p
            for p in self.policies()
            if p.operation.kind is kind and (span is None or p.operation.span is span)
        ]

    def copy(self) -> "PolicyStore":
        clone = PolicyStore()
        clone._policies = dict(self._policies)
        clone._revision = self._revision
        clone._next_id = self._next_id
        return clone

    def save(self, path: str | Path) -> None:
        lines = [f"{i} {render_policy(self._policies[i])}\n" for i in self.ids()]
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.writelines(lines)

    @classmethod
    def load(cls, path: str | Path, registry: ApplicationRegistry | None = None) -> "PolicyStore":
        store = cls()
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.strip()
                if not line:
                    continue
                head, _, statement = line.partition(" ")
                if not head.isdigit() or not statement.strip():
                    raise FormatError(f"{path}:{lineno}: expected '<id> <policy statement>'")
                try:
                    policy = parse_policy(statement.strip(), registry)
                except Exception as exc:
                    raise FormatError(f"{path}:{lineno}: {exc}") from exc
                try:
                    store.add(policy, int(head))
                except DuplicateIdError as exc:
                    raise FormatError(f"{path}:{lineno}: {exc}") from exc
        return store
