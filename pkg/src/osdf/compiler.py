"""From an intent plus a concrete flow to per-switch match-action rules.

A route policy expands into one forwarding rule per switch along a
minimal-hop path that honors the policy's waypoints; the QoS variant
attaches a drop-band meter to every rule.  An alert policy expands into a
single log-and-drop rule at the flow's ingress switch.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, replace
from typing import Iterable, Union

from .errors import (
    NoPathError,
    NotFoundError,
    PolicyNotApplicableError,
    UnresolvableHostError,
)
from .network import Link, NetworkConfig, PortRef
from .policy import (
    DEFAULT_REGISTRY,
    ApplicationRegistry,
    OperationKind,
    Policy,
    Span,
    TrafficProfile,
    Transport,
    Waypoint,
)


@dataclass(frozen=True)
class MatchFields:
    """Concrete header fields a rule matches on.

    A ``None`` port is a wildcard.  Forward-direction selectors always set
    dst_port (from the application registry); reverse-direction rules move
    it to src_port and wildcard the client side.
    """

    src_host: str
    dst_host: str
    src_addr: str
    dst_addr: str
    transport: Transport
    dst_port: int | None
    src_port: int | None = None

    def reversed(self) -> "MatchFields":
        return MatchFields(
            src_host=self.dst_host,
            dst_host=self.src_host,
            src_addr=self.dst_addr,
            dst_addr=self.src_addr,
            transport=self.transport,
            dst_port=self.src_port,
            src_port=self.dst_port,
        )

    def covers(self, probe: "MatchFields") -> bool:
        """Whether a packet with the probe's concrete fields hits this rule."""
        return (
            self.src_addr == probe.src_addr
            and self.dst_addr == probe.dst_addr
            and self.transport is probe.transport
            and (self.dst_port is None or self.dst_port == probe.dst_port)
            and (self.src_port is None or self.src_port == probe.src_port)
        )

    def render(self) -> str:
        src = self.src_host if self.src_port is None else f"{self.src_host}:{self.src_port}"
        port = self.dst_port if self.dst_port is not None else "*"
        return f"{self.transport.value}/{port} {src}->{self.dst_host}"


@dataclass(frozen=True)
class ForwardToPort:
    port: int

    def render(self) -> str:
        return f"forward:{self.port}"


@dataclass(frozen=True)
class Drop:
    def render(self) -> str:
        return "drop"


@dataclass(frozen=True)
class LogAndDrop:
    def render(self) -> str:
        return "log-and-drop"


RuleAction = Union[ForwardToPort, Drop, LogAndDrop]


@dataclass(frozen=True)
class MeterSpec:
    """A rate cap whose band drops traffic beyond the configured rate."""

    rate_bps: int
    band_action: Drop = Drop()

    def __post_init__(self) -> None:
        if self.rate_bps <= 0:
            raise ValueError("meter rate must be positive")


@dataclass(frozen=True)
class FlowRule:
    switch: str
    match: MatchFields
    action: RuleAction
    priority: int
    meter: MeterSpec | None = None

    def render(self) -> str:
        text = (
            f"{self.switch} pri={self.priority} match={self.match.render()} "
            f"action={self.action.render()}"
        )
        if self.meter is not None:
            text += f" meter={self.meter.rate_bps}"
        return text


@dataclass(frozen=True)
class Hop:
    switch: str
    ingress_port: int
    egress_port: int


@dataclass(frozen=True)
class Path:
    """An attachment-to-attachment walk; consecutive hops share a link."""

    hops: tuple[Hop, ...]
    src_host: str
    dst_host: str

    @property
    def switches(self) -> tuple[str, ...]:
        return tuple(hop.switch for hop in self.hops)

    def node_sequence(self) -> tuple[str, ...]:
        return (self.src_host, *self.switches, self.dst_host)

    def egress_at(self, switch: str) -> int:
        for hop in self.hops:
            if hop.switch == switch:
                return hop.egress_port
        raise ValueError(f"{switch} is not on the path")


def build_selector(
    profile: TrafficProfile,
    src_host: str,
    dst_host: str,
    config: NetworkConfig,
    registry: ApplicationRegistry | None = None,
) -> MatchFields:
    """Expand a traffic profile into concrete match fields for one flow."""
    registry = registry or DEFAULT_REGISTRY
    template = registry.template(profile.application)
    src = config.topology.host(src_host)
    dst = config.topology.host(dst_host)
    return MatchFields(
        src_host=src.name,
        dst_host=dst.name,
        src_addr=src.address,
        dst_addr=dst.address,
        transport=template.transport,
        dst_port=template.dst_port,
    )


def _shortest_sequence(config: NetworkConfig, start: str, goal: str) -> tuple[str, ...] | None:
    """Minimal-hop switch sequence, ties broken by the lexicographically
    smallest sequence.  None when the goal is unreachable."""
    topology = config.topology
    if start == goal:
        return (start,)
    heap: list[tuple[int, tuple[str, ...]]] = [(0, (start,))]
    done: set[str] = set()
    while heap:
        dist, path = heapq.heappop(heap)
        node = path[-1]
        if node == goal:
            return path
        if node in done:
            continue
        done.add(node)
        for neighbor in topology.neighbor_switches(node):
            if neighbor not in done:
                heapq.heappush(heap, (dist + 1, path + (neighbor,)))
    return None


def select_path(
    config: NetworkConfig,
    src_host: str,
    dst_host: str,
    waypoints: Iterable[Waypoint] = (),
) -> Path:
    """A minimal-hop path visiting the waypoints in order.

    A waypoint with a port constrains the path to leave that device through
    that port.  Among equal-length candidates the lexicographically
    smallest switch sequence wins; parallel links are resolved to the one
    with the lowest near-side port.
    """
    topology = config.topology
    src = topology.host(src_host)
    dst = topology.host(dst_host)
    waypoints = tuple(waypoints)
    for waypoint in waypoints:
        if not topology.has_switch(waypoint.device):
            raise NotFoundError(f"waypoint device {waypoint.device!r} is not a switch")

    sequence: list[str] = [src.attach.switch]
    edges: list[Link | None] = []  # None = pick the best link when building hops
    current = src.attach.switch
    forced_port: int | None = None
    targets = [(w.device, w.port) for w in waypoints] + [(dst.attach.switch, None)]
    for target, next_port in targets:
        if forced_port is not None:
            link = topology.link_at(PortRef(current, forced_port))
            if link is None:
                raise NoPathError(
                    f"waypoint {current}:{forced_port} has no link on that port"
                )
            nxt = link.other_end(current).switch
            sequence.append(nxt)
            edges.append(link)
            current = nxt
        sub = _shortest_sequence(config, current, target)
        if sub is None:
            raise NoPathError(f"no path from {current} to {target}")
        sequence.extend(sub[1:])
        edges.extend([None] * (len(sub) - 1))
        current = target
        forced_port = next_port

    hops: list[Hop] = []
    ingress = src.attach.port
    for k, edge in enumerate(edges):
        u, v = sequence[k], sequence[k + 1]
        link = edge if edge is not None else topology.best_link(u, v)
        assert link is not None  # the search only walks declared links
        hops.append(Hop(u, ingress, link.port_on(u)))
        ingress = link.port_on(v)
    hops.append(Hop(sequence[-1], ingress, dst.attach.port))
    return Path(tuple(hops), src_host, dst_host)


def policy_covers_flow(
    policy: Policy, src_host: str, dst_host: str, config: NetworkConfig
) -> bool:
    """Whether the flow lies inside the policy's span and address space.

    Inter-site policies match the region pair in either direction, mirroring
    the 'between two sites' reading of from/to.
    """
    span = config.classify_flow_span(src_host, dst_host)
    if policy.operation.span is Span.INTRA:
        if not span.is_intra or span.source_region != policy.source_region:
            return False
    else:
        if span.is_intra:
            return False
        if {span.source_region, span.destination_region} != {
            policy.source_region,
            policy.destination_region,
        }:
            return False
    return policy.address_space.covers(src_host, dst_host)


def resolve_policy_hosts(policy: Policy, config: NetworkConfig) -> None:
    """Check every host named by the policy exists in the configuration."""
    for name in sorted(policy.address_space.host_names()):
        if name not in config.topology.hosts:
            raise UnresolvableHostError(f"unknown host {name!r}", policy.id)


@dataclass(frozen=True)
class CompiledFlow:
    rules: tuple[FlowRule, ...]
    path: Path | None  # None for alerts


def compile_flow(
    policy: Policy,
    src_host: str,
    dst_host: str,
    config: NetworkConfig,
    registry: ApplicationRegistry | None = None,
    src_port: int | None = None,
    include_reverse: bool = False,
) -> CompiledFlow:
    """Compile one policy for one concrete flow.

    Route policies yield one forwarding rule per path switch (and, when
    include_reverse is set, a mirrored rule per switch for the reverse
    direction); QoS routes meter every rule; alerts yield a single
    log-and-drop rule at the ingress switch.
    """
    if not policy_covers_flow(policy, src_host, dst_host, config):
        raise PolicyNotApplicableError(
            f"policy {policy.id if policy.id is not None else '?'} does not apply "
            f"to flow {src_host}->{dst_host}"
        )
    resolve_policy_hosts(policy, config)
    match = build_selector(policy.profile, src_host, dst_host, config, registry)
    if src_port is not None:
        match = replace(match, src_port=src_port)

    if policy.operation.kind is OperationKind.ALERT:
        ingress = config.topology.host(src_host).attach.switch
        rule = FlowRule(ingress, match, LogAndDrop(), policy.priority)
        return CompiledFlow((rule,), None)

    path = select_path(config, src_host, dst_host, policy.address_space.waypoints)
    meter = None
    if policy.operation.is_qos:
        limit = policy.rate_limit
        assert limit is not None  # enforced by Policy validation
        meter = MeterSpec(limit.rate_bps)
    rules = [
        FlowRule(hop.switch, match, ForwardToPort(hop.egress_port), policy.priority, meter)
        for hop in path.hops
    ]
    if include_reverse:
        back = match.reversed()
        rules.extend(
            FlowRule(hop.switch, back, ForwardToPort(hop.ingress_port), policy.priority, meter)
            for hop in reversed(path.hops)
        )
    return CompiledFlow(tuple(rules), path)


def compile_policy(
    policy: Policy,
    src_host: str,
    dst_host: str,
    config: NetworkConfig,
    registry: ApplicationRegistry | None = None,
    src_port: int | None = None,
    include_reverse: bool = False,
) -> list[FlowRule]:
    return list(
        compile_flow(
            policy, src_host, dst_host, config, registry, src_port, include_reverse
        ).rules
    )
