"""Pairwise policy conflict classification and resolution recommendations.

Two policies can only conflict when they name the same traffic profile and
the same source and destination regions.  Given that, an ordered pair
(P_i, P_j) is checked against five conditions in a fixed order and the
first match wins:

    Redundancy      same operation,      SC_i subset of SC_j,    p_i <= p_j
    Shadowing       different operation, SC_i subset of SC_j,    p_i <  p_j
    Generalization  different operation, SC_i superset of SC_j,  p_i <  p_j
    Correlation     different operation, SCs incomparable but
                    intersecting,                                p_i <= p_j
    Overlap         same operation,      SCs incomparable but
                    intersecting,        priority ignored

SC is the pair component of the address space; waypoints do not take part.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from enum import Enum
from typing import Union

from .errors import InvalidConflictClassError, UnresolvableHostError
from .network import NetworkConfig
from .policy import AddressSpace, Policy, Span, render_policy
from .store import PolicyStore


class ConflictClass(Enum):
    NO_CONFLICT = "NoConflict"
    REDUNDANCY = "Redundancy"
    SHADOWING = "Shadowing"
    GENERALIZATION = "Generalization"
    CORRELATION = "Correlation"
    OVERLAP = "Overlap"


@dataclass(frozen=True)
class RemovePolicy:
    """Drop one policy; lossy when a wildcard space cannot be narrowed."""

    policy_id: int
    lossy: bool = False

    def render(self) -> str:
        text = f"remove policy P{self.policy_id}"
        if self.lossy:
            text += " (lossy: a wildcard address space cannot be narrowed)"
        return text

    def to_dict(self) -> dict:
        return {"kind": "remove_policy", "policy_id": self.policy_id, "lossy": self.lossy}


@dataclass(frozen=True)
class UpdateAddressSpace:
    """Shrink one policy's address space to the given pairs."""

    policy_id: int
    new_space: AddressSpace

    def render(self) -> str:
        body = ",".join(f"({a},{b})" for a, b in self.new_space.sorted_pairs())
        return f"update policy P{self.policy_id} address space to between {body}"

    def to_dict(self) -> dict:
        return {
            "kind": "update_address_space",
            "policy_id": self.policy_id,
            "pairs": [list(p) for p in self.new_space.sorted_pairs()],
        }


@dataclass(frozen=True)
class ReplaceBoth:
    """Remove both policies and insert one covering the union of their pairs."""

    remove_first: int
    remove_second: int
    insert: Policy

    def render(self) -> str:
        return (
            f"replace policies P{self.remove_first} and P{self.remove_second} "
            f"with merged policy: {render_policy(self.insert)}"
        )

    def to_dict(self) -> dict:
        return {
            "kind": "replace_both",
            "remove": [self.remove_first, self.remove_second],
            "insert": render_policy(self.insert),
        }


ResolutionAction = Union[RemovePolicy, UpdateAddressSpace, ReplaceBoth]


@dataclass(frozen=True)
class ConflictReport:
    first: int
    second: int
    conflict: ConflictClass
    resolution: ResolutionAction

    def render(self) -> str:
        return f"{self.conflict.value} P{self.first} vs P{self.second}: {self.resolution.render()}"

    def to_dict(self) -> dict:
        return {
            "class": self.conflict.value,
            "first": self.first,
            "second": self.second,
            "resolution": self.resolution.to_dict(),
            "text": self.render(),
        }


def _check_resolvable(policy: Policy, config: NetworkConfig) -> None:
    """Every host a policy names must sit in the policy's regions."""
    space = policy.address_space
    if not space.pairs:
        return
    try:
        src_hosts = config.region(policy.source_region).member_hosts
        dst_hosts = config.region(policy.destination_region).member_hosts
    except Exception as exc:
        raise UnresolvableHostError(str(exc), policy.id) from exc
    for a, b in sorted(space.pairs):
        for name in (a, b):
            if name not in config.topology.hosts:
                raise UnresolvableHostError(f"unknown host {name!r}", policy.id)
        if policy.operation.span is Span.INTRA:
            for name in (a, b):
                if name not in src_hosts:
                    raise UnresolvableHostError(
                        f"host {name!r} is not in region {policy.source_region!r}", policy.id
                    )
        else:
            spans_both = (a in src_hosts and b in dst_hosts) or (
                b in src_hosts and a in dst_hosts
            )
            if not spans_both:
                raise UnresolvableHostError(
                    f"pair ({a},{b}) does not span regions "
                    f"{policy.source_region!r} and {policy.destination_region!r}",
                    policy.id,
                )


def classify_pair(p_i: Policy, p_j: Policy, config: NetworkConfig | None = None) -> ConflictClass:
    """Classify the ordered pair (P_i, P_j) into one conflict class.

    With a config, host names are first resolved against the policies'
    regions (UnresolvableHostError otherwise).
    """
    if config is not None:
        _check_resolvable(p_i, config)
        _check_resolvable(p_j, config)

    if (
        p_i.profile != p_j.profile
        or p_i.source_region != p_j.source_region
        or p_i.destination_region != p_j.destination_region
    ):
        return ConflictClass.NO_CONFLICT

    same_op = p_i.operation is p_j.operation
    sc_i, sc_j = p_i.address_space, p_j.address_space
    i_subset = sc_i.is_subset(sc_j)
    j_subset = sc_j.is_subset(sc_i)

    if same_op and i_subset and p_i.priority <= p_j.priority:
        return ConflictClass.REDUNDANCY
    if not same_op and i_subset and p_i.priority < p_j.priority:
        return ConflictClass.SHADOWING
    if not same_op and j_subset and p_i.priority < p_j.priority:
        return ConflictClass.GENERALIZATION
    incomparable = not i_subset and not j_subset
    if incomparable and sc_i.intersects(sc_j):
        if not same_op and p_i.priority <= p_j.priority:
            return ConflictClass.CORRELATION
        if same_op:
            return ConflictClass.OVERLAP
    return ConflictClass.NO_CONFLICT


def recommend(p_i: Policy, p_j: Policy, conflict: ConflictClass) -> ResolutionAction:
    """The resolution for a conflicting ordered pair.

    Redundancy and Shadowing drop P_i.  Generalization shrinks P_i's space
    by P_j's (or drops P_i, flagged lossy, when P_i has the wildcard space,
    whose complement is not representable).  Correlation shrinks the
    lower-priority policy's space by the common pairs.  Overlap replaces
    both with one policy over the union of the pair sets, keeping the
    higher-priority policy's other fields.
    """
    if conflict is ConflictClass.NO_CONFLICT:
        raise InvalidConflictClassError("no resolution for a non-conflicting pair")
    if p_i.id is None or p_j.id is None:
        raise ValueError("resolution requires store-assigned policy ids")

    if conflict in (ConflictClass.REDUNDANCY, ConflictClass.SHADOWING):
        return RemovePolicy(p_i.id)

    if conflict is ConflictClass.GENERALIZATION:
        narrowed = p_i.address_space.minus(p_j.address_space)
        if narrowed is None:
            return RemovePolicy(p_i.id, lossy=True)
        return UpdateAddressSpace(p_i.id, narrowed)

    if conflict is ConflictClass.CORRELATION:
        # Correlation implies p_i.priority <= p_j.priority; update P_i.
        common = p_i.address_space.common_pairs(p_j.address_space)
        narrowed = dataclasses.replace(
            p_i.address_space, pairs=(p_i.address_space.pairs or frozenset()) - common
        )
        return UpdateAddressSpace(p_i.id, narrowed)

    # Overlap: both spaces are finite (the wildcard is comparable to anything).
    base = p_i if (-p_i.priority, p_i.id) < (-p_j.priority, p_j.id) else p_j
    union = (p_i.address_space.pairs or frozenset()) | (p_j.address_space.pairs or frozenset())
    merged_space = dataclasses.replace(base.address_space, pairs=union)
    merged = dataclasses.replace(base, address_space=merged_space, id=None)
    return ReplaceBoth(p_i.id, p_j.id, merged)


def detect_all(store: PolicyStore, config: NetworkConfig | None = None) -> list[ConflictReport]:
    """Classify every ordered pair of stored policies.

    One report per conflicting pair, ordered by (first, second).  Overlap
    holds symmetrically, so it is reported once with the lower id first.
    """
    policies = store.policies()
    reports: list[ConflictReport] = []
    for p_i in policies:
        for p_j in policies:
            if p_i.id == p_j.id:
                continue
            conflict = classify_pair(p_i, p_j, config)
            if conflict is ConflictClass.NO_CONFLICT:
                continue
            if conflict is ConflictClass.OVERLAP and p_i.id > p_j.id:
                continue
            reports.append(
                ConflictReport(p_i.id, p_j.id, conflict, recommend(p_i, p_j, conflict))
            )
    reports.sort(key=lambda r: (r.first, r.second))
    return reports


def apply_resolution(store: PolicyStore, action: ResolutionAction) -> int | None:
    """Apply a recommendation to the store; returns the new id for inserts."""
    if isinstance(action, RemovePolicy):
        store.remove(action.policy_id)
        return None
    if isinstance(action, UpdateAddressSpace):
        current = store.get(action.policy_id)
        store.replace(action.policy_id, dataclasses.replace(current, address_space=action.new_space))
        return None
    if isinstance(action, ReplaceBoth):
        store.remove(action.remove_first)
        store.remove(action.remove_second)
        return store.add(action.insert)
    raise TypeError(f"not a resolution action: {action!r}")
