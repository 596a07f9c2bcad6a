"""Policy statements: grammar, parsing, and canonical rendering.

A policy is a single line of text such as::

    route WEB in A priority 20 between (H1,H3),(H1,H5) via S3:2 ratelimit 200mbps

``route`` or ``alert`` picks the network function, ``in R`` versus
``from R1 to R2`` picks intra- versus inter-site scope, and a trailing
``ratelimit`` clause turns a route into its QoS-provisioning variant.
Omitting ``between`` (or writing ``between all hosts``) applies the policy
to every host pair in scope.  Keywords are case-insensitive; host, region,
and device names are case-sensitive and must not collide with keywords.

Grammar (clauses in this fixed order)::

    policy    := verb app scope ["priority" INT]
                 ["between" pairs | "between" "all" "hosts"]
                 ["via" waypoints] ["ratelimit" INT unit]
    verb      := "route" | "alert"
    scope     := "in" NAME | "from" NAME "to" NAME
    pairs     := "(" NAME "," NAME ")" { "," "(" NAME "," NAME ")" }
    waypoints := NAME [":" INT] { "," NAME [":" INT] }
    unit      := "mbps" | "gbps"
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable

from .errors import ParseError, SemanticError, UnknownApplicationError

DEFAULT_PRIORITY = 10

MBPS = 1_000_000
GBPS = 1_000_000_000

KEYWORDS = frozenset(
    {
        "route",
        "alert",
        "in",
        "from",
        "to",
        "priority",
        "between",
        "all",
        "hosts",
        "via",
        "ratelimit",
        "mbps",
        "gbps",
    }
)

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_-]*\Z")


def _require_name(value: str, what: str) -> str:
    if not isinstance(value, str) or not _NAME_RE.match(value) or value.lower() in KEYWORDS:
        raise SemanticError(f"invalid {what} {value!r}")
    return value


class Transport(Enum):
    TCP = "TCP"
    UDP = "UDP"


class TrafficType(Enum):
    REAL_TIME = "RealTime"
    BEST_EFFORT = "BestEffort"


class OperationKind(Enum):
    ROUTE = "route"
    ALERT = "alert"


class Span(Enum):
    INTRA = "intra"
    INTER = "inter"


class NetworkOperation(Enum):
    """The six network functions a policy can request.

    Each variant is a route or an alert, applied inside one region or
    between two, with QoS provisioning as a refinement of routing.
    """

    INTRA_SITE_ROUTE = ("route", "intra", False)
    INTER_SITE_ROUTE = ("route", "inter", False)
    INTRA_SITE_ALERT = ("alert", "intra", False)
    INTER_SITE_ALERT = ("alert", "inter", False)
    INTRA_SITE_ROUTE_QOS = ("route", "intra", True)
    INTER_SITE_ROUTE_QOS = ("route", "inter", True)

    @property
    def kind(self) -> OperationKind:
        return OperationKind(self.value[0])

    @property
    def span(self) -> Span:
        return Span(self.value[1])

    @property
    def is_qos(self) -> bool:
        return self.value[2]

    @classmethod
    def from_parts(cls, kind: OperationKind, span: Span, qos: bool = False) -> "NetworkOperation":
        if qos and kind is not OperationKind.ROUTE:
            raise ValueError("QoS provisioning refines routing only")
        key = (kind.value, span.value, qos)
        for op in cls:
            if op.value == key:
                return op
        raise ValueError(f"no operation for {key}")


@dataclass(frozen=True)
class TrafficProfile:
    """High-level description of an application's traffic."""

    application: str
    transport: Transport
    traffic_type: TrafficType


@dataclass(frozen=True)
class AppTemplate:
    """Concrete match template an application name expands to."""

    transport: Transport
    dst_port: int
    traffic_type: TrafficType


class ApplicationRegistry:
    """Case-insensitive application name to match template mapping.

    Ships with WEB, VIDEO, and VOICE; administrators can register further
    applications at runtime.  Names are stored in canonical upper case.
    """

    def __init__(self) -> None:
        self._apps: dict[str, AppTemplate] = {}

    @staticmethod
    def canonical(name: str) -> str:
        _require_name(name, "application name")
        return name.upper()

    def register(
        self,
        name: str,
        transport: Transport,
        dst_port: int,
        traffic_type: TrafficType = TrafficType.BEST_EFFORT,
    ) -> None:
        canonical = self.canonical(name)
        if canonical in self._apps:
            raise ValueError(f"application {canonical} already registered")
        if not 1 <= dst_port <= 65535:
            raise ValueError(f"destination port {dst_port} out of range")
        self._apps[canonical] = AppTemplate(transport, dst_port, traffic_type)

    def __contains__(self, name: str) -> bool:
        return name.upper() in self._apps

    def template(self, name: str) -> AppTemplate:
        try:
            return self._apps[name.upper()]
        except KeyError:
            raise UnknownApplicationError(f"unknown application {name!r}") from None

    def profile(self, name: str) -> TrafficProfile:
        template = self.template(name)
        return TrafficProfile(name.upper(), template.transport, template.traffic_type)

    def names(self) -> list[str]:
        return sorted(self._apps)


def default_registry() -> ApplicationRegistry:
    registry = ApplicationRegistry()
    registry.register("WEB", Transport.TCP, 80, TrafficType.BEST_EFFORT)
    registry.register("VIDEO", Transport.TCP, 5001, TrafficType.REAL_TIME)
    registry.register("VOICE", Transport.UDP, 5060, TrafficType.REAL_TIME)
    return registry


DEFAULT_REGISTRY = default_registry()


@dataclass(frozen=True)
class Waypoint:
    """A device the path must pass through, optionally leaving by a port."""

    device: str
    port: int | None = None

    def render(self) -> str:
        return self.device if self.port is None else f"{self.device}:{self.port}"


HostPair = tuple[str, str]


def normalize_pair(a: str, b: str) -> HostPair:
    """Host pairs are unordered; the canonical form sorts the two names."""
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class AddressSpace:
    """Host pairs a policy applies to, plus ordered waypoint constraints.

    ``pairs is None`` is the wildcard: the policy covers every host pair in
    scope.  The subset/intersection algebra below involves only the pair
    component; waypoints constrain path selection, not coverage.
    """

    pairs: frozenset[HostPair] | None = None
    waypoints: tuple[Waypoint, ...] = ()

    @classmethod
    def all_hosts(cls, waypoints: Iterable[Waypoint] = ()) -> "AddressSpace":
        return cls(None, tuple(waypoints))

    @classmethod
    def between(
        cls, pairs: Iterable[tuple[str, str]], waypoints: Iterable[Waypoint] = ()
    ) -> "AddressSpace":
        return cls(frozenset(normalize_pair(a, b) for a, b in pairs), tuple(waypoints))

    @property
    def is_all_hosts(self) -> bool:
        return self.pairs is None

    def covers(self, a: str, b: str) -> bool:
        return self.pairs is None or normalize_pair(a, b) in self.pairs

    def is_subset(self, other: "AddressSpace") -> bool:
        if other.pairs is None:
            return True
        if self.pairs is None:
            return False
        return self.pairs <= other.pairs

    def intersects(self, other: "AddressSpace") -> bool:
        if self.pairs is None:
            return other.pairs is None or bool(other.pairs)
        if other.pairs is None:
            return bool(self.pairs)
        return not self.pairs.isdisjoint(other.pairs)

    def common_pairs(self, other: "AddressSpace") -> frozenset[HostPair]:
        """Pairs covered by both; defined only for two finite spaces."""
        if self.pairs is None or other.pairs is None:
            raise ValueError("common_pairs requires two finite address spaces")
        return self.pairs & other.pairs

    def minus(self, other: "AddressSpace") -> "AddressSpace | None":
        """Pairs covered by self but not by other.

        Returns None when self is the wildcard: the complement of a finite
        set is not representable (the language has no negation).
        """
        if self.pairs is None:
            return None
        if other.pairs is None:
            return replace(self, pairs=frozenset())
        return replace(self, pairs=self.pairs - other.pairs)

    def union_pairs(self, other: "AddressSpace") -> "AddressSpace":
        if self.pairs is None or other.pairs is None:
            raise ValueError("union_pairs requires two finite address spaces")
        return replace(self, pairs=self.pairs | other.pairs)

    def sorted_pairs(self) -> list[HostPair]:
        return sorted(self.pairs or ())

    def host_names(self) -> set[str]:
        names: set[str] = set()
        for a, b in self.pairs or ():
            names.add(a)
            names.add(b)
        return names


class TrafficConditionKind(Enum):
    RATE_LIMIT_PER_FLOW = "ratelimit"


@dataclass(frozen=True)
class TrafficCondition:
    """A QoS requirement attached to a policy."""

    kind: TrafficConditionKind
    rate_bps: int


@dataclass(frozen=True)
class Policy:
    """One administrator intent, validated on construction."""

    operation: NetworkOperation
    profile: TrafficProfile
    source_region: str
    destination_region: str
    address_space: AddressSpace = field(default_factory=AddressSpace.all_hosts)
    priority: int = DEFAULT_PRIORITY
    traffic_conditions: tuple[TrafficCondition, ...] = ()
    id: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "traffic_conditions", tuple(self.traffic_conditions))
        app = self.profile.application
        _require_name(app, "application name")
        if app != app.upper():
            raise SemanticError(f"application name {app!r} must be canonical upper case")
        _require_name(self.source_region, "region name")
        _require_name(self.destination_region, "region name")
        if not isinstance(self.priority, int) or self.priority < 1:
            raise SemanticError(f"priority must be a positive integer, got {self.priority!r}")
        if self.operation.span is Span.INTRA:
            if self.source_region != self.destination_region:
                raise SemanticError(
                    "intra-site operations require equal source and destination regions"
                )
        elif self.source_region == self.destination_region:
            raise SemanticError(
                "inter-site operations require distinct source and destination regions"
            )
        self._validate_space()
        self._validate_conditions()

    def _validate_space(self) -> None:
        space = self.address_space
        if space.pairs is not None:
            if not space.pairs:
                raise SemanticError("a finite address space must contain at least one host pair")
            for pair in space.pairs:
                a, b = pair
                _require_name(a, "host name")
                _require_name(b, "host name")
                if pair != normalize_pair(a, b):
                    raise SemanticError(f"host pair {pair!r} is not normalized")
        for waypoint in space.waypoints:
            _require_name(waypoint.device, "device name")
            if waypoint.port is not None and waypoint.port < 1:
                raise SemanticError(f"waypoint port must be positive, got {waypoint.port}")

    def _validate_conditions(self) -> None:
        limits = [c for c in self.traffic_conditions if c.kind is TrafficConditionKind.RATE_LIMIT_PER_FLOW]
        if len(limits) > 1:
            raise SemanticError("at most one rate limit per policy")
        for condition in limits:
            if condition.rate_bps <= 0:
                raise SemanticError("rate limit must be positive")
            if condition.rate_bps % MBPS != 0:
                raise SemanticError("rate limit must be a whole number of Mbps")
        if self.operation.kind is OperationKind.ROUTE:
            if self.operation.is_qos and not limits:
                raise SemanticError("a QoS route requires a rate limit condition")
            if not self.operation.is_qos and limits:
                raise SemanticError("a plain route must not carry a rate limit condition")

    @property
    def rate_limit(self) -> TrafficCondition | None:
        for condition in self.traffic_conditions:
            if condition.kind is TrafficConditionKind.RATE_LIMIT_PER_FLOW:
                return condition
        return None

    def with_id(self, policy_id: int) -> "Policy":
        return replace(self, id=policy_id)


@dataclass(frozen=True)
class _Token:
    kind: str  # "name" | "int" | "sym" | "end"
    text: str
    pos: int


_TOKEN_RE = re.compile(r"(?P<ws>\s+)|(?P<int>\d+)|(?P<name>[A-Za-z_][A-Za-z0-9_-]*)|(?P<sym>[(),:])")


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i = 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if m is None:
            raise ParseError(i, ("a name", "an integer", "'(' ')' ',' ':'"), text[i])
        if m.lastgroup != "ws":
            tokens.append(_Token(m.lastgroup or "", m.group(), i))
        i = m.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        token = self.tokens[self.i]
        self.i += 1
        return token

    def fail(self, *expected: str) -> None:
        token = self.peek()
        raise ParseError(token.pos, expected, token.text)

    def at_keyword(self, keyword: str) -> bool:
        token = self.peek()
        return token.kind == "name" and token.text.lower() == keyword

    def take_keyword(self, *keywords: str) -> str:
        token = self.peek()
        if token.kind == "name" and token.text.lower() in keywords:
            self.advance()
            return token.text.lower()
        self.fail(*(f"'{k}'" for k in keywords))
        raise AssertionError("unreachable")

    def take_name(self, what: str) -> str:
        token = self.peek()
        if token.kind == "name" and token.text.lower() not in KEYWORDS:
            self.advance()
            return token.text
        self.fail(what)
        raise AssertionError("unreachable")

    def take_int(self, what: str) -> int:
        token = self.peek()
        if token.kind == "int":
            self.advance()
            return int(token.text)
        self.fail(what)
        raise AssertionError("unreachable")

    def take_sym(self, symbol: str) -> None:
        token = self.peek()
        if token.kind == "sym" and token.text == symbol:
            self.advance()
            return
        self.fail(f"'{symbol}'")

    def at_sym(self, symbol: str) -> bool:
        token = self.peek()
        return token.kind == "sym" and token.text == symbol


def _parse_pair(p: _Parser) -> tuple[str, str]:
    p.take_sym("(")
    a = p.take_name("host name")
    p.take_sym(",")
    b = p.take_name("host name")
    p.take_sym(")")
    return a, b


def _parse_waypoint(p: _Parser) -> Waypoint:
    device = p.take_name("device name")
    port: int | None = None
    if p.at_sym(":"):
        p.advance()
        port = p.take_int("port number")
    return Waypoint(device, port)


def parse_policy(text: str, registry: ApplicationRegistry | None = None) -> Policy:
    """Parse one policy statement into a validated Policy value.

    Raises ParseError for malformed input and SemanticError for well-formed
    input with an inconsistent meaning (unknown operation or application,
    intra/inter region mismatch).
    """
    registry = registry or DEFAULT_REGISTRY
    p = _Parser(text)

    token = p.peek()
    if token.kind != "name":
        p.fail("'route'", "'alert'")
    verb = token.text.lower()
    if verb not in ("route", "alert"):
        raise SemanticError(f"unknown operation {token.text!r} (expected 'route' or 'alert')")
    p.advance()
    kind = OperationKind.ROUTE if verb == "route" else OperationKind.ALERT

    app = p.take_name("application name")
    profile = registry.profile(app)

    scope = p.take_keyword("in", "from")
    if scope == "in":
        source_region = destination_region = p.take_name("region name")
        span = Span.INTRA
    else:
        source_region = p.take_name("region name")
        p.take_keyword("to")
        destination_region = p.take_name("region name")
        span = Span.INTER

    priority = DEFAULT_PRIORITY
    if p.at_keyword("priority"):
        p.advance()
        priority = p.take_int("priority value")

    pairs: list[tuple[str, str]] | None = None
    if p.at_keyword("between"):
        p.advance()
        if p.at_keyword("all"):
            p.advance()
            p.take_keyword("hosts")
        else:
            pairs = [_parse_pair(p)]
            while p.at_sym(","):
                p.advance()
                pairs.append(_parse_pair(p))

    waypoints: list[Waypoint] = []
    if p.at_keyword("via"):
        p.advance()
        waypoints.append(_parse_waypoint(p))
        while p.at_sym(","):
            p.advance()
            waypoints.append(_parse_waypoint(p))

    rate_bps: int | None = None
    if p.at_keyword("ratelimit"):
        p.advance()
        value = p.take_int("rate value")
        unit = p.take_keyword("mbps", "gbps")
        rate_bps = value * (MBPS if unit == "mbps" else GBPS)

    if p.peek().kind != "end":
        p.fail("end of policy statement")

    operation = NetworkOperation.from_parts(
        kind, span, qos=kind is OperationKind.ROUTE and rate_bps is not None
    )
    if pairs is None:
        space = AddressSpace.all_hosts(waypoints)
    else:
        space = AddressSpace.between(pairs, waypoints)
    conditions: tuple[TrafficCondition, ...] = ()
    if rate_bps is not None:
        conditions = (TrafficCondition(TrafficConditionKind.RATE_LIMIT_PER_FLOW, rate_bps),)

    return Policy(
        operation=operation,
        profile=profile,
        source_region=source_region,
        destination_region=destination_region,
        address_space=space,
        priority=priority,
        traffic_conditions=conditions,
    )


def _render_rate(rate_bps: int) -> str:
    if rate_bps % GBPS == 0:
        return f"{rate_bps // GBPS}gbps"
    return f"{rate_bps // MBPS}mbps"


def render_policy(policy: Policy) -> str:
    """Render a Policy back to its canonical statement.

    The default priority and the all-hosts address space are elided, pair
    sets are emitted in sorted order, and parse_policy(render_policy(p))
    reconstructs a structurally equal Policy.
    """
    parts = [policy.operation.kind.value, policy.profile.application]
    if policy.operation.span is Span.INTRA:
        parts.append(f"in {policy.source_region}")
    else:
        parts.append(f"from {policy.source_region} to {policy.destination_region}")
    if policy.priority != DEFAULT_PRIORITY:
        parts.append(f"priority {policy.priority}")
    space = policy.address_space
    if not space.is_all_hosts:
        body = ",".join(f"({a},{b})" for a, b in space.sorted_pairs())
        parts.append(f"between {body}")
    if space.waypoints:
        parts.append("via " + ",".join(w.render() for w in space.waypoints))
    limit = policy.rate_limit
    if limit is not None:
        parts.append(f"ratelimit {_render_rate(limit.rate_bps)}")
    return " ".join(parts)
