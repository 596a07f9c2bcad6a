"""Switches, links, hosts, and regions, loaded from a JSON configuration.

Config schema (all four keys required)::

    {
      "switches": [{"id": "S1"}, ...],
      "links":    [{"a": "S1:2", "b": "S2:1", "capacity_mbps": 1000}, ...],
      "hosts":    [{"name": "H1", "attach": "S1:3"}, ...],
      "regions":  [{"name": "A", "switches": ["S1", "S2"]}, ...]
    }

``capacity_mbps`` is optional and defaults to 1 Gbps.  Regions partition
the switch set: every switch belongs to exactly one region.  A port feeds
at most one link or one host attachment.  Host addresses are synthesized
deterministically from the sorted host names (the schema carries none).

FormatError covers undecodable structure; ValidationError covers decodable
configs that violate an invariant, with the offending item in the message.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable

from .errors import FormatError, NotFoundError, ValidationError
from .policy import DEFAULT_PRIORITY

DEFAULT_LINK_CAPACITY_BPS = 1_000_000_000


@dataclass(frozen=True, order=True)
class PortRef:
    switch: str
    port: int

    def render(self) -> str:
        return f"{self.switch}:{self.port}"

    @classmethod
    def parse(cls, text: str, where: str) -> "PortRef":
        switch, sep, port = str(text).rpartition(":")
        if not sep or not switch or not port.isdigit():
            raise FormatError(f"{where}: expected '<switch>:<port>', got {text!r}")
        number = int(port)
        if number < 1:
            raise ValidationError(f"{where}: port numbers start at 1, got {text!r}")
        return cls(switch, number)


@dataclass(frozen=True)
class Link:
    """An undirected switch-to-switch link with a capacity in bits/second.

    Endpoints are stored in sorted order so equal links compare equal
    regardless of declaration order.
    """

    a: PortRef
    b: PortRef
    capacity_bps: int

    def __post_init__(self) -> None:
        if self.b < self.a:
            first, second = self.b, self.a
            object.__setattr__(self, "a", first)
            object.__setattr__(self, "b", second)

    def port_on(self, switch: str) -> int:
        if self.a.switch == switch:
            return self.a.port
        if self.b.switch == switch:
            return self.b.port
        raise ValueError(f"link {self.render()} does not touch {switch}")

    def other_end(self, switch: str) -> PortRef:
        if self.a.switch == switch:
            return self.b
        if self.b.switch == switch:
            return self.a
        raise ValueError(f"link {self.render()} does not touch {switch}")

    def end_on(self, switch: str) -> PortRef:
        if self.a.switch == switch:
            return self.a
        if self.b.switch == switch:
            return self.b
        raise ValueError(f"link {self.render()} does not touch {switch}")

    def render(self) -> str:
        return f"{self.a.render()}-{self.b.render()}"


@dataclass(frozen=True)
class Host:
    name: str
    attach: PortRef
    address: str


class Topology:
    """An undirected multigraph of switches plus host attachment points."""

    def __init__(self, switches: Iterable[str], links: Iterable[Link], hosts: Iterable[Host]):
        self.switches: frozenset[str] = frozenset(switches)
        self.links: tuple[Link, ...] = tuple(links)
        self.hosts: dict[str, Host] = {h.name: h for h in sorted(hosts, key=lambda h: h.name)}
        self._port_links: dict[PortRef, Link] = {}
        self._adjacency: dict[str, list[tuple[str, Link]]] = {s: [] for s in self.switches}
        for link in self.links:
            self._port_links[link.a] = link
            self._port_links[link.b] = link
            self._adjacency[link.a.switch].append((link.b.switch, link))
            self._adjacency[link.b.switch].append((link.a.switch, link))
        for neighbors in self._adjacency.values():
            neighbors.sort(key=lambda item: (item[0], item[1].port_on(item[0])))

    def has_switch(self, switch: str) -> bool:
        return switch in self.switches

    def host(self, name: str) -> Host:
        try:
            return self.hosts[name]
        except KeyError:
            raise NotFoundError(f"no host named {name!r}") from None

    def neighbors(self, switch: str) -> list[tuple[str, Link]]:
        return self._adjacency[switch]

    def neighbor_switches(self, switch: str) -> list[str]:
        seen: list[str] = []
        for neighbor, _ in self._adjacency[switch]:
            if not seen or seen[-1] != neighbor:
                seen.append(neighbor)
        return seen

    def link_at(self, ref: PortRef) -> Link | None:
        return self._port_links.get(ref)

    def best_link(self, a: str, b: str) -> Link | None:
        """The link joining two switches, lowest a-side port among parallels."""
        candidates = [link for neighbor, link in self._adjacency.get(a, ()) if neighbor == b]
        if not candidates:
            return None
        return min(candidates, key=lambda link: (link.port_on(a), link.port_on(b)))

    def ports_of(self, switch: str) -> frozenset[int]:
        ports = {ref.port for ref in self._port_links if ref.switch == switch}
        ports.update(h.attach.port for h in self.hosts.values() if h.attach.switch == switch)
        return frozenset(ports)


@dataclass(frozen=True)
class Region:
    name: str
    member_devices: frozenset[str]
    member_hosts: frozenset[str]


@dataclass(frozen=True)
class Defaults:
    priority: int = DEFAULT_PRIORITY
    link_capacity_bps: int = DEFAULT_LINK_CAPACITY_BPS


@dataclass(frozen=True)
class FlowSpan:
    """The region pair a host-to-host flow crosses."""

    source_region: str
    destination_region: str

    @property
    def is_intra(self) -> bool:
        return self.source_region == self.destination_region


class NetworkConfig:
    """Validated topology plus the region partition; immutable after load."""

    def __init__(self, topology: Topology, regions: Iterable[Region], defaults: Defaults = Defaults()):
        self.topology = topology
        self.regions: tuple[Region, ...] = tuple(regions)
        self.defaults = defaults
        self._region_by_name: dict[str, Region] = {r.name: r for r in self.regions}
        self._region_of_switch: dict[str, Region] = {}
        for region in self.regions:
            for switch in region.member_devices:
                self._region_of_switch[switch] = region

    def region(self, name: str) -> Region:
        try:
            return self._region_by_name[name]
        except KeyError:
            raise NotFoundError(f"no region named {name!r}") from None

    def region_of(self, name: str) -> Region:
        """The unique region containing a switch or a host."""
        if name in self._region_of_switch:
            return self._region_of_switch[name]
        host = self.topology.hosts.get(name)
        if host is not None:
            return self._region_of_switch[host.attach.switch]
        raise NotFoundError(f"no switch or host named {name!r}")

    def classify_flow_span(self, src_host: str, dst_host: str) -> FlowSpan:
        src = self.topology.host(src_host)
        dst = self.topology.host(dst_host)
        return FlowSpan(
            self._region_of_switch[src.attach.switch].name,
            self._region_of_switch[dst.attach.switch].name,
        )


def _expect_mapping(value: Any, where: str) -> dict:
    if not isinstance(value, dict):
        raise FormatError(f"{where}: expected an object, got {type(value).__name__}")
    return value


def _expect_keys(item: dict, required: set[str], optional: set[str], where: str) -> None:
    keys = set(item)
    missing = required - keys
    extra = keys - required - optional
    if missing:
        raise FormatError(f"{where}: missing keys {sorted(missing)}")
    if extra:
        raise FormatError(f"{where}: unknown keys {sorted(extra)}")


def _expect_list(data: dict, key: str, where: str) -> list:
    value = data.get(key)
    if not isinstance(value, list):
        raise FormatError(f"{where}: '{key}' must be an array")
    return value


def _synthetic_address(index: int) -> str:
    return f"10.0.{index // 256}.{index % 256}"


def config_from_dict(data: Any, source: str = "<config>") -> NetworkConfig:
    top = _expect_mapping(data, source)
    _expect_keys(top, {"switches", "links", "hosts", "regions"}, set(), source)

    switch_ids: list[str] = []
    for i, item in enumerate(_expect_list(top, "switches", source)):
        where = f"{source}: switches[{i}]"
        entry = _expect_mapping(item, where)
        _expect_keys(entry, {"id"}, set(), where)
        switch_id = entry["id"]
        if not isinstance(switch_id, str) or not switch_id:
            raise FormatError(f"{where}: 'id' must be a non-empty string")
        if switch_id in switch_ids:
            raise ValidationError(f"{where}: duplicate switch id {switch_id!r}")
        switch_ids.append(switch_id)
    switches = set(switch_ids)

    used_ports: dict[PortRef, str] = {}

    def claim_port(ref: PortRef, where: str) -> None:
        if ref.switch not in switches:
            raise ValidationError(f"{where}: unknown switch {ref.switch!r}")
        if ref in used_ports:
            raise ValidationError(
                f"{where}: port {ref.render()} already used by {used_ports[ref]}"
            )
        used_ports[ref] = where

    links: list[Link] = []
    for i, item in enumerate(_expect_list(top, "links", source)):
        where = f"{source}: links[{i}]"
        entry = _expect_mapping(item, where)
        _expect_keys(entry, {"a", "b"}, {"capacity_mbps"}, where)
        a = PortRef.parse(entry["a"], where)
        b = PortRef.parse(entry["b"], where)
        if a.switch == b.switch:
            raise ValidationError(f"{where}: a link must join two distinct switches")
        claim_port(a, where)
        claim_port(b, where)
        capacity_mbps = entry.get("capacity_mbps", DEFAULT_LINK_CAPACITY_BPS // 1_000_000)
        if not isinstance(capacity_mbps, (int, float)) or isinstance(capacity_mbps, bool):
            raise FormatError(f"{where}: 'capacity_mbps' must be a number")
        capacity_bps = int(round(capacity_mbps * 1_000_000))
        if capacity_bps <= 0:
            raise ValidationError(f"{where}: link capacity must be positive")
        links.append(Link(a, b, capacity_bps))

    host_entries: list[tuple[str, PortRef]] = []
    host_names: set[str] = set()
    for i, item in enumerate(_expect_list(top, "hosts", source)):
        where = f"{source}: hosts[{i}]"
        entry = _expect_mapping(item, where)
        _expect_keys(entry, {"name", "attach"}, set(), where)
        name = entry["name"]
        if not isinstance(name, str) or not name:
            raise FormatError(f"{where}: 'name' must be a non-empty string")
        if name in host_names:
            raise ValidationError(f"{where}: duplicate host name {name!r}")
        host_names.add(name)
        attach = PortRef.parse(entry["attach"], where)
        claim_port(attach, where)
        host_entries.append((name, attach))

    address_of = {
        name: _synthetic_address(k) for k, name in enumerate(sorted(host_names), start=1)
    }
    hosts = [Host(name, attach, address_of[name]) for name, attach in host_entries]

    regions: list[Region] = []
    region_names: set[str] = set()
    assigned: dict[str, str] = {}
    host_by_switch: dict[str, set[str]] = {}
    for host in hosts:
        host_by_switch.setdefault(host.attach.switch, set()).add(host.name)
    for i, item in enumerate(_expect_list(top, "regions", source)):
        where = f"{source}: regions[{i}]"
        entry = _expect_mapping(item, where)
        _expect_keys(entry, {"name", "switches"}, set(), where)
        name = entry["name"]
        if not isinstance(name, str) or not name:
            raise FormatError(f"{where}: 'name' must be a non-empty string")
        if name in region_names:
            raise ValidationError(f"{where}: duplicate region name {name!r}")
        region_names.add(name)
        members = entry["switches"]
        if not isinstance(members, list) or not all(isinstance(s, str) for s in members):
            raise FormatError(f"{where}: 'switches' must be an array of switch ids")
        for switch in members:
            if switch not in switches:
                raise ValidationError(f"{where}: unknown switch {switch!r}")
            if switch in assigned:
                raise ValidationError(
                    f"{where}: switch {switch!r} already belongs to region {assigned[switch]!r}"
                )
            assigned[switch] = name
        member_hosts = frozenset(
            h for switch in members for h in host_by_switch.get(switch, ())
        )
        regions.append(Region(name, frozenset(members), member_hosts))

    unassigned = switches - set(assigned)
    if unassigned:
        raise ValidationError(
            f"{source}: switches {sorted(unassigned)} belong to no region"
        )

    return NetworkConfig(Topology(switch_ids, links, hosts), regions)


def load_config(path: str | Path) -> NetworkConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: not valid JSON ({exc})") from exc
    return config_from_dict(data, source=str(path))
