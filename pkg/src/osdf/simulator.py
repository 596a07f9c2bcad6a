"""Deterministic flow-level switch and controller simulation.

Switches hold priority-ordered flow tables; a flow request whose first
packet misses at its ingress switch raises a packet-in, and the controller
answers under one of two modes:

* ``osdf``: the winning policy's rules are installed on every switch of
  the end-to-end path at once (one packet-in per flow).
* ``reactive``: each switch along the path misses in turn and gets only
  its own rule (one packet-in per path switch).

Time is logical: every event carries a sequence number, and identical
inputs produce byte-identical logs.  Steady-state rates come from a
progressive-filling max-min solver with per-flow meter and demand caps.

Flow scripts are JSON arrays of steps ordered by ``at``::

    {"at": 1, "op": "flow", "src": "H1", "dst": "H40", "app": "WEB",
     "demand_mbps": 100, "src_port": 10001}
    {"at": 2, "op": "add_policy", "policy": "route WEB in C priority 100 via S3:2", "id": 1}
    {"at": 3, "op": "remove_policy", "id": 1}

The log export is JSON lines, one event per line.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path as FsPath
from typing import Any, Iterable, Mapping, Union

from .compiler import (
    CompiledFlow,
    FlowRule,
    ForwardToPort,
    MatchFields,
    Path,
    compile_flow,
    policy_covers_flow,
)
from .errors import FormatError, NoPathError
from .network import NetworkConfig, PortRef
from .policy import (
    DEFAULT_REGISTRY,
    ApplicationRegistry,
    OperationKind,
    Policy,
    Transport,
    parse_policy,
)
from .store import PolicyStore

DEFAULT_TABLE_CAPACITY = 2000

EVENT_KINDS = ("packet_in", "rule_install", "alert_logged", "flow_admitted", "flow_dropped")


class Mode(Enum):
    OSDF_PREINSTALL = "osdf"
    REACTIVE_BASELINE = "reactive"


@dataclass(frozen=True)
class FlowRequest:
    """The first packet of a flow, abstracted: endpoints, ports, and an
    offered load in bits per second."""

    src_host: str
    dst_host: str
    transport: Transport
    dst_port: int
    demand_bps: int
    src_port: int | None = None

    def __post_init__(self) -> None:
        if self.demand_bps <= 0:
            raise ValueError("flow demand must be positive")


@dataclass(frozen=True)
class SimEvent:
    seq: int
    kind: str
    data: dict[str, Any]

    def to_json(self) -> str:
        return json.dumps({"seq": self.seq, "event": self.kind, **self.data}, sort_keys=True)


class SimLog:
    """Append-only, totally ordered event stream."""

    def __init__(self) -> None:
        self.events: list[SimEvent] = []

    def append(self, kind: str, **data: Any) -> SimEvent:
        event = SimEvent(len(self.events), kind, data)
        self.events.append(event)
        return event

    def of_kind(self, kind: str) -> list[SimEvent]:
        return [e for e in self.events if e.kind == kind]

    def counts(self) -> dict[str, int]:
        out = {kind: 0 for kind in EVENT_KINDS}
        for event in self.events:
            out[event.kind] = out.get(event.kind, 0) + 1
        return out

    def to_jsonl(self) -> str:
        return "".join(event.to_json() + "\n" for event in self.events)

    def __len__(self) -> int:
        return len(self.events)


@dataclass
class TableEntry:
    rule: FlowRule
    seq: int  # installation order, shared across all switches
    owner: str  # flow id


class SwitchState:
    """One switch's flow table with priority-then-age matching."""

    def __init__(self, switch_id: str, capacity: int = DEFAULT_TABLE_CAPACITY):
        self.switch_id = switch_id
        self.capacity = capacity
        self.entries: list[TableEntry] = []

    @property
    def size(self) -> int:
        return len(self.entries)

    def lookup(self, probe: MatchFields) -> TableEntry | None:
        """Highest-priority matching entry, earliest installed among equals."""
        best: TableEntry | None = None
        for entry in self.entries:
            if entry.rule.match.covers(probe):
                if best is None or (entry.rule.priority, -entry.seq) > (
                    best.rule.priority,
                    -best.seq,
                ):
                    best = entry
        return best

    def install(self, rule: FlowRule, seq: int, owner: str) -> None:
        if len(self.entries) >= self.capacity:
            raise OverflowError(f"flow table of {self.switch_id} is full")
        self.entries.append(TableEntry(rule, seq, owner))

    def remove_owned_by(self, owner: str) -> int:
        before = len(self.entries)
        self.entries = [e for e in self.entries if e.owner != owner]
        return before - len(self.entries)


@dataclass
class FlowRecord:
    flow_id: str
    request: FlowRequest
    policy_id: int | None = None
    path: Path | None = None
    rules: tuple[FlowRule, ...] = ()
    state: str = "pending"  # "admitted" | "dropped"
    meter_cap_bps: int | None = None


@dataclass(frozen=True)
class LinkUse:
    allocated_bps: float
    capacity_bps: int

    @property
    def utilization(self) -> float:
        return self.allocated_bps / self.capacity_bps


@dataclass(frozen=True)
class ThroughputReport:
    """Steady-state per-flow rates and directed per-link allocations."""

    flow_rates_bps: Mapping[str, float]
    links: Mapping[str, LinkUse]

    def to_dict(self) -> dict[str, Any]:
        return {
            "flow_rates_bps": {k: self.flow_rates_bps[k] for k in sorted(self.flow_rates_bps)},
            "links": {
                k: {
                    "allocated_bps": self.links[k].allocated_bps,
                    "capacity_bps": self.links[k].capacity_bps,
                }
                for k in sorted(self.links)
            },
        }


def winning_policy(
    store: PolicyStore,
    request: FlowRequest,
    config: NetworkConfig,
    registry: ApplicationRegistry | None = None,
) -> Policy | None:
    """The applicable policy with the highest priority, lowest id on ties."""
    registry = registry or DEFAULT_REGISTRY
    best: Policy | None = None
    for policy in store.policies():
        template = registry.template(policy.profile.application)
        if template.transport is not request.transport or template.dst_port != request.dst_port:
            continue
        if not policy_covers_flow(policy, request.src_host, request.dst_host, config):
            continue
        if best is None or (-policy.priority, policy.id) < (-best.priority, best.id):
            best = policy
    return best


class Simulator:
    """Single-threaded, deterministic engine over one config and store.

    The store is owned by the simulator once handed over: policy changes go
    through add_policy/remove_policy so affected flows get recompiled.
    """

    def __init__(
        self,
        config: NetworkConfig,
        store: PolicyStore | None = None,
        registry: ApplicationRegistry | None = None,
        table_capacity: int = DEFAULT_TABLE_CAPACITY,
    ):
        self.config = config
        self.store = store if store is not None else PolicyStore()
        self.registry = registry or DEFAULT_REGISTRY
        self.log = SimLog()
        self.switches: dict[str, SwitchState] = {
            s: SwitchState(s, table_capacity) for s in sorted(config.topology.switches)
        }
        self.flows: dict[str, FlowRecord] = {}
        self._install_seq = 0

    # -- flow injection ------------------------------------------------

    def inject_flow(self, request: FlowRequest, mode: Mode | str) -> list[SimEvent]:
        """Process one flow request; returns the events it generated."""
        mode = Mode(mode)
        start = len(self.log)
        self._inject(request, mode)
        return self.log.events[start:]

    def _probe(self, request: FlowRequest) -> MatchFields:
        topology = self.config.topology
        src = topology.host(request.src_host)
        dst = topology.host(request.dst_host)
        return MatchFields(
            src_host=src.name,
            dst_host=dst.name,
            src_addr=src.address,
            dst_addr=dst.address,
            transport=request.transport,
            dst_port=request.dst_port,
            src_port=request.src_port,
        )

    def _inject(self, request: FlowRequest, mode: Mode) -> None:
        flow_id = f"F{len(self.flows) + 1}"
        record = FlowRecord(flow_id, request)
        self.flows[flow_id] = record
        probe = self._probe(request)
        ingress = self.config.topology.host(request.src_host).attach.switch

        hit = self.switches[ingress].lookup(probe)
        if hit is not None:
            owner = self.flows.get(hit.owner)
            if isinstance(hit.rule.action, ForwardToPort) and owner is not None and owner.path:
                record.policy_id = owner.policy_id
                record.path = owner.path
                record.meter_cap_bps = owner.meter_cap_bps
                record.state = "admitted"
                self.log.append(
                    "flow_admitted",
                    flow=flow_id,
                    policy=record.policy_id,
                    path=list(owner.path.node_sequence()),
                )
            else:
                record.state = "dropped"
                self.log.append("flow_dropped", flow=flow_id, reason="drop-rule")
            return

        self.log.append("packet_in", switch=ingress, flow=flow_id)
        policy = winning_policy(self.store, request, self.config, self.registry)
        if policy is None:
            record.state = "dropped"
            self.log.append("flow_dropped", flow=flow_id, reason="no-policy")
            return
        record.policy_id = policy.id

        if policy.operation.kind is OperationKind.ALERT:
            self._apply_alert(record, policy)
            return

        compiled = self._compile(policy, request)
        if compiled is None:
            record.state = "dropped"
            self.log.append("flow_dropped", flow=flow_id, reason="no-path")
            return
        if not self._fits(compiled.rules):
            record.state = "dropped"
            self.log.append("flow_dropped", flow=flow_id, reason="table-overflow")
            return

        first = True
        for rule in compiled.rules:
            if mode is Mode.REACTIVE_BASELINE and not first:
                self.log.append("packet_in", switch=rule.switch, flow=flow_id)
            first = False
            self._install(rule, flow_id)
        self._admit(record, compiled)

    def _compile(self, policy: Policy, request: FlowRequest) -> CompiledFlow | None:
        try:
            return compile_flow(
                policy,
                request.src_host,
                request.dst_host,
                self.config,
                self.registry,
                src_port=request.src_port,
            )
        except NoPathError:
            return None

    def _fits(self, rules: Iterable[FlowRule]) -> bool:
        needed: dict[str, int] = {}
        for rule in rules:
            needed[rule.switch] = needed.get(rule.switch, 0) + 1
        return all(
            self.switches[s].size + n <= self.switches[s].capacity for s, n in needed.items()
        )

    def _install(self, rule: FlowRule, owner: str) -> None:
        self.switches[rule.switch].install(rule, self._install_seq, owner)
        self._install_seq += 1
        self.log.append(
            "rule_install",
            switch=rule.switch,
            flow=owner,
            priority=rule.priority,
            match=rule.match.render(),
            action=rule.action.render(),
            meter_bps=rule.meter.rate_bps if rule.meter else None,
        )

    def _admit(self, record: FlowRecord, compiled: CompiledFlow) -> None:
        assert compiled.path is not None
        record.path = compiled.path
        record.rules = compiled.rules
        record.meter_cap_bps = min(
            (r.meter.rate_bps for r in compiled.rules if r.meter), default=None
        )
        record.state = "admitted"
        self.log.append(
            "flow_admitted",
            flow=record.flow_id,
            policy=record.policy_id,
            path=list(compiled.path.node_sequence()),
        )

    def _apply_alert(self, record: FlowRecord, policy: Policy) -> None:
        self.log.append("alert_logged", flow=record.flow_id, policy=policy.id)
        compiled = compile_flow(
            policy,
            record.request.src_host,
            record.request.dst_host,
            self.config,
            self.registry,
            src_port=record.request.src_port,
        )
        record.policy_id = policy.id
        record.path = None
        record.rules = ()
        record.meter_cap_bps = None
        record.state = "dropped"
        if self._fits(compiled.rules):
            for rule in compiled.rules:
                self._install(rule, record.flow_id)
            self.log.append("flow_dropped", flow=record.flow_id, reason="alert")
        else:
            self.log.append("flow_dropped", flow=record.flow_id, reason="table-overflow")

    # -- policy changes ------------------------------------------------

    def add_policy(self, policy: Policy, policy_id: int | None = None) -> int:
        """Activate a policy and recompile any flows it now wins."""
        assigned = self.store.add(policy, policy_id)
        self._reevaluate()
        return assigned

    def remove_policy(self, policy_id: int) -> Policy:
        """Deactivate a policy and recompile the flows it was serving."""
        removed = self.store.remove(policy_id)
        self._reevaluate()
        return removed

    def _reevaluate(self) -> None:
        for record in list(self.flows.values()):
            if record.state != "admitted":
                continue
            winner = winning_policy(self.store, record.request, self.config, self.registry)
            if winner is not None and winner.id == record.policy_id:
                continue
            self._remove_flow_rules(record.flow_id)
            if winner is None:
                record.state = "dropped"
                record.path = None
                record.rules = ()
                record.policy_id = None
                self.log.append("flow_dropped", flow=record.flow_id, reason="no-policy")
                continue
            if winner.operation.kind is OperationKind.ALERT:
                self._apply_alert(record, winner)
                continue
            compiled = self._compile(winner, record.request)
            record.policy_id = winner.id
            if compiled is None:
                record.state = "dropped"
                self.log.append("flow_dropped", flow=record.flow_id, reason="no-path")
                continue
            if not self._fits(compiled.rules):
                record.state = "dropped"
                self.log.append("flow_dropped", flow=record.flow_id, reason="table-overflow")
                continue
            for rule in compiled.rules:
                self._install(rule, record.flow_id)
            self._admit(record, compiled)

    def _remove_flow_rules(self, flow_id: str) -> None:
        for switch in self.switches.values():
            switch.remove_owned_by(flow_id)

    # -- steady-state rates ---------------------------------------------

    def _flow_links(self, path: Path) -> list[str]:
        """Directed link keys the flow occupies, egress to far end."""
        keys: list[str] = []
        topology = self.config.topology
        for hop in path.hops[:-1]:
            ref = PortRef(hop.switch, hop.egress_port)
            link = topology.link_at(ref)
            assert link is not None  # paths only walk declared links
            keys.append(f"{ref.render()}->{link.other_end(hop.switch).render()}")
        return keys

    def solve_throughput(self) -> ThroughputReport:
        """Progressive-filling max-min allocation over the admitted flows.

        Each flow is capped by its demand and its tightest path meter; every
        directed link's allocation never exceeds its capacity.
        """
        topology = self.config.topology
        admitted = [
            r for r in self.flows.values() if r.state == "admitted" and r.path is not None
        ]
        caps: dict[str, float] = {}
        links_of: dict[str, list[str]] = {}
        link_capacity: dict[str, int] = {}
        members: dict[str, set[str]] = {}
        for record in admitted:
            cap = float(record.request.demand_bps)
            if record.meter_cap_bps is not None:
                cap = min(cap, float(record.meter_cap_bps))
            caps[record.flow_id] = cap
            keys = self._flow_links(record.path)
            links_of[record.flow_id] = keys
            for key in keys:
                ref = PortRef.parse(key.split("->", 1)[0], "internal")
                link = topology.link_at(ref)
                assert link is not None
                link_capacity[key] = link.capacity_bps
                members.setdefault(key, set()).add(record.flow_id)

        rate = {fid: 0.0 for fid in caps}
        used = {key: 0.0 for key in link_capacity}
        active = set(caps)
        while active:
            increment = min(caps[fid] - rate[fid] for fid in active)
            for key, flows_on in members.items():
                live = len(flows_on & active)
                if live:
                    headroom = link_capacity[key] - used[key]
                    increment = min(increment, headroom / live)
            increment = max(increment, 0.0)
            for key, flows_on in members.items():
                used[key] += increment * len(flows_on & active)
            frozen: set[str] = set()
            for fid in active:
                rate[fid] += increment
                if rate[fid] >= caps[fid] - 1e-9:
                    rate[fid] = caps[fid]
                    frozen.add(fid)
            for key, flows_on in members.items():
                if used[key] >= link_capacity[key] * (1 - 1e-12):
                    frozen.update(flows_on & active)
            if not frozen:
                break  # numerical safety; every round should freeze someone
            active -= frozen

        links = {key: LinkUse(used[key], link_capacity[key]) for key in sorted(used)}
        return ThroughputReport(dict(sorted(rate.items())), links)


# -- scenario scripts ----------------------------------------------------


@dataclass(frozen=True)
class FlowStep:
    at: int
    request: FlowRequest


@dataclass(frozen=True)
class AddPolicyStep:
    at: int
    policy: Policy
    policy_id: int | None = None


@dataclass(frozen=True)
class RemovePolicyStep:
    at: int
    policy_id: int


ScriptStep = Union[FlowStep, AddPolicyStep, RemovePolicyStep]


def parse_script(
    data: Any, source: str = "<script>", registry: ApplicationRegistry | None = None
) -> list[ScriptStep]:
    """Decode a flow script; steps run in 'at' order, ties in list order."""
    registry = registry or DEFAULT_REGISTRY
    if not isinstance(data, list):
        raise FormatError(f"{source}: a flow script is a JSON array of steps")
    steps: list[ScriptStep] = []
    for i, item in enumerate(data):
        where = f"{source}: step[{i}]"
        if not isinstance(item, dict):
            raise FormatError(f"{where}: expected an object")
        at = item.get("at")
        if not isinstance(at, int):
            raise FormatError(f"{where}: 'at' must be an integer")
        op = item.get("op")
        if op == "flow":
            steps.append(FlowStep(at, _parse_flow_step(item, where, registry)))
        elif op == "add_policy":
            statement = item.get("policy")
            if not isinstance(statement, str):
                raise FormatError(f"{where}: 'policy' must be a statement string")
            try:
                policy = parse_policy(statement, registry)
            except Exception as exc:
                raise FormatError(f"{where}: {exc}") from exc
            policy_id = item.get("id")
            if policy_id is not None and not isinstance(policy_id, int):
                raise FormatError(f"{where}: 'id' must be an integer")
            steps.append(AddPolicyStep(at, policy, policy_id))
        elif op == "remove_policy":
            policy_id = item.get("id")
            if not isinstance(policy_id, int):
                raise FormatError(f"{where}: 'id' must be an integer")
            steps.append(RemovePolicyStep(at, policy_id))
        else:
            raise FormatError(f"{where}: unknown op {op!r}")
    steps.sort(key=lambda s: s.at)
    return steps


def _parse_flow_step(item: dict, where: str, registry: ApplicationRegistry) -> FlowRequest:
    src = item.get("src")
    dst = item.get("dst")
    if not isinstance(src, str) or not isinstance(dst, str):
        raise FormatError(f"{where}: 'src' and 'dst' must be host names")
    app = item.get("app")
    if app is not None:
        template = registry.template(app)
        transport, dst_port = template.transport, template.dst_port
    else:
        try:
            transport = Transport(str(item.get("transport", "")).upper())
        except ValueError:
            raise FormatError(f"{where}: 'transport' must be TCP or UDP") from None
        dst_port = item.get("dst_port")
        if not isinstance(dst_port, int):
            raise FormatError(f"{where}: 'dst_port' must be an integer")
    demand = item.get("demand_mbps")
    if not isinstance(demand, (int, float)) or isinstance(demand, bool) or demand <= 0:
        raise FormatError(f"{where}: 'demand_mbps' must be a positive number")
    src_port = item.get("src_port")
    if src_port is not None and not isinstance(src_port, int):
        raise FormatError(f"{where}: 'src_port' must be an integer")
    return FlowRequest(
        src_host=src,
        dst_host=dst,
        transport=transport,
        dst_port=dst_port,
        demand_bps=int(round(demand * 1_000_000)),
        src_port=src_port,
    )


def load_script(
    path: str | FsPath, registry: ApplicationRegistry | None = None
) -> list[ScriptStep]:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: not valid JSON ({exc})") from exc
    return parse_script(data, source=str(path), registry=registry)


def run_scenario(
    config: NetworkConfig,
    store: PolicyStore,
    script: Iterable[ScriptStep],
    mode: Mode | str,
    table_capacity: int = DEFAULT_TABLE_CAPACITY,
    registry: ApplicationRegistry | None = None,
) -> tuple[SimLog, ThroughputReport]:
    """Run a scenario script over a copy of the store.

    Returns the complete event log and the final throughput solution.
    """
    mode = Mode(mode)
    sim = Simulator(config, store.copy(), registry=registry, table_capacity=table_capacity)
    for step in script:
        if isinstance(step, FlowStep):
            sim.inject_flow(step.request, mode)
        elif isinstance(step, AddPolicyStep):
            sim.add_policy(step.policy, step.policy_id)
        elif isinstance(step, RemovePolicyStep):
            sim.remove_policy(step.policy_id)
        else:
            raise TypeError(f"not a script step: {step!r}")
    return sim.log, sim.solve_throughput()
