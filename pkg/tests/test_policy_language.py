from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import osdf
from osdf import (
    AddressSpace,
    NetworkOperation,
    ParseError,
    Policy,
    SemanticError,
    TrafficCondition,
    TrafficConditionKind,
    Transport,
    TrafficType,
    Waypoint,
    parse_policy,
    render_policy,
)
from osdf.policy import DEFAULT_PRIORITY, MBPS, normalize_pair


def test_parse_intra_route_with_pairs():
    p = parse_policy("route WEB in A between (H1,H3),(H1,H5),(H3,H5)")
    assert p.operation is NetworkOperation.INTRA_SITE_ROUTE
    assert p.profile.application == "WEB"
    assert p.priority == DEFAULT_PRIORITY
    assert p.source_region == p.destination_region == "A"
    assert p.address_space.pairs == frozenset({("H1", "H3"), ("H1", "H5"), ("H3", "H5")})


def test_parse_empty_string_fails_at_position_zero():
    with pytest.raises(ParseError) as err:
        parse_policy("")
    assert err.value.position == 0
    assert any("route" in e for e in err.value.expected)


def test_parse_inter_route_with_waypoint():
    p = parse_policy("route WEB from IT to Sales via Sales-S1:2")
    assert p.operation is NetworkOperation.INTER_SITE_ROUTE
    assert p.source_region == "IT"
    assert p.destination_region == "Sales"
    assert p.priority == DEFAULT_PRIORITY
    assert p.address_space.is_all_hosts
    assert p.address_space.waypoints == (Waypoint("Sales-S1", 2),)


def test_parse_priority_and_waypoint():
    p = parse_policy("route WEB in C priority 100 via S3:2")
    assert p.operation is NetworkOperation.INTRA_SITE_ROUTE
    assert p.priority == 100
    assert p.source_region == "C"
    assert p.address_space.waypoints == (Waypoint("S3", 2),)


def test_ratelimit_selects_qos_variant():
    p = parse_policy("route VIDEO from IT to Sales ratelimit 500mbps")
    assert p.operation is NetworkOperation.INTER_SITE_ROUTE_QOS
    assert p.rate_limit == TrafficCondition(
        TrafficConditionKind.RATE_LIMIT_PER_FLOW, 500_000_000
    )
    g = parse_policy("route VIDEO from IT to Sales ratelimit 1 gbps")
    assert g.rate_limit.rate_bps == 1_000_000_000


def test_between_all_hosts_equals_absent_clause():
    explicit = parse_policy("route WEB in A between all hosts")
    implicit = parse_policy("route WEB in A")
    assert explicit == implicit
    assert explicit.address_space.is_all_hosts


def test_alert_verb_selects_alert_variant():
    p = parse_policy("alert VOICE in A between (H3,H4)")
    assert p.operation is NetworkOperation.INTRA_SITE_ALERT
    q = parse_policy("alert VIDEO from A to B priority 200")
    assert q.operation is NetworkOperation.INTER_SITE_ALERT


def test_alert_with_ratelimit_keeps_alert_operation():
    # The grammar admits it; the condition rides along without a QoS variant.
    p = parse_policy("alert WEB in A ratelimit 100mbps")
    assert p.operation is NetworkOperation.INTRA_SITE_ALERT
    assert p.rate_limit is not None
    assert parse_policy(render_policy(p)) == p


def test_keywords_are_case_insensitive_names_are_not():
    p = parse_policy("ROUTE web IN A BETWEEN (H1,H3)")
    assert p.profile.application == "WEB"
    assert p.source_region == "A"
    q = parse_policy("route web in a")
    assert q.source_region == "a"


def test_unknown_operation_and_application_are_semantic_errors():
    with pytest.raises(SemanticError):
        parse_policy("block WEB in A")
    with pytest.raises(SemanticError):
        parse_policy("route QUAKE in A")


def test_inter_scope_requires_distinct_regions():
    with pytest.raises(SemanticError):
        parse_policy("route WEB from A to A")


def test_malformed_inputs_report_position_and_expectations():
    with pytest.raises(ParseError) as err:
        parse_policy("route WEB in A between (H1 H3)")
    assert err.value.position == len("route WEB in A between (H1 ")
    assert "','" in err.value.expected
    with pytest.raises(ParseError):
        parse_policy("route WEB in A priority x")
    with pytest.raises(ParseError):
        parse_policy("route WEB in A extra")
    with pytest.raises(ParseError):
        parse_policy("route WEB in A ratelimit 10 kbps")


def test_clause_order_is_fixed():
    with pytest.raises(ParseError):
        parse_policy("route WEB in A via S1 between (H1,H2)")


def test_parser_is_deterministic_and_normalizes_pairs():
    a = parse_policy("route WEB in A between (H3,H1),(H5,H1)")
    b = parse_policy("route WEB in A between (H1,H5),(H1,H3)")
    assert a == b
    assert a.address_space.sorted_pairs() == [("H1", "H3"), ("H1", "H5")]


def test_render_elides_defaults():
    p = parse_policy("route WEB in A priority 10")
    assert render_policy(p) == "route WEB in A"
    q = parse_policy("route WEB in A between all hosts")
    assert render_policy(q) == "route WEB in A"


def test_render_includes_via_and_ratelimit():
    text = "route WEB from IT to Sales priority 20 between (H1,H9) via S3:2,S6 ratelimit 200mbps"
    p = parse_policy(text)
    rendered = render_policy(p)
    assert "via S3:2,S6" in rendered
    assert "ratelimit 200mbps" in rendered
    assert parse_policy(rendered) == p


def test_registry_defaults_and_extension():
    reg = osdf.default_registry()
    assert reg.template("WEB").dst_port == 80
    assert reg.template("web").transport is Transport.TCP
    assert reg.template("VIDEO").dst_port == 5001
    assert reg.template("VOICE") == osdf.policy.AppTemplate(
        Transport.UDP, 5060, TrafficType.REAL_TIME
    )
    reg.register("SSH", Transport.TCP, 22)
    p = parse_policy("route SSH in A", reg)
    assert p.profile.application == "SSH"
    with pytest.raises(ValueError):
        reg.register("ssh", Transport.TCP, 2222)


def test_policy_validation_rejects_bad_values():
    web = osdf.DEFAULT_REGISTRY.profile("WEB")
    with pytest.raises(SemanticError):
        Policy(NetworkOperation.INTRA_SITE_ROUTE, web, "A", "B")
    with pytest.raises(SemanticError):
        Policy(NetworkOperation.INTER_SITE_ROUTE, web, "A", "A")
    with pytest.raises(SemanticError):
        Policy(NetworkOperation.INTRA_SITE_ROUTE, web, "A", "A", priority=0)
    with pytest.raises(SemanticError):
        Policy(
            NetworkOperation.INTRA_SITE_ROUTE,
            web,
            "A",
            "A",
            address_space=AddressSpace(frozenset()),
        )
    with pytest.raises(SemanticError):
        Policy(
            NetworkOperation.INTRA_SITE_ROUTE_QOS, web, "A", "A", traffic_conditions=()
        )


# -- generated properties --------------------------------------------------

_names = st.sampled_from([f"H{i}" for i in range(1, 10)])
_regions = st.sampled_from(["A", "B", "RC", "RD"])
_apps = st.sampled_from(["WEB", "VIDEO", "VOICE"])


@st.composite
def policies(draw) -> Policy:
    kind = draw(st.sampled_from([osdf.OperationKind.ROUTE, osdf.OperationKind.ALERT]))
    span = draw(st.sampled_from([osdf.Span.INTRA, osdf.Span.INTER]))
    qos = kind is osdf.OperationKind.ROUTE and draw(st.booleans())
    operation = NetworkOperation.from_parts(kind, span, qos)
    if span is osdf.Span.INTRA:
        source = destination = draw(_regions)
    else:
        source, destination = draw(
            st.lists(_regions, min_size=2, max_size=2, unique=True)
        )
    if draw(st.booleans()):
        pairs = None
    else:
        pairs = draw(
            st.sets(
                st.tuples(_names, _names).filter(lambda p: p[0] != p[1]),
                min_size=1,
                max_size=5,
            )
        )
    waypoints = tuple(
        Waypoint(device, draw(st.sampled_from([None, 1, 2, 4])))
        for device in draw(st.lists(st.sampled_from(["S1", "S3", "S6"]), max_size=2, unique=True))
    )
    space = (
        AddressSpace.all_hosts(waypoints)
        if pairs is None
        else AddressSpace.between(pairs, waypoints)
    )
    conditions = ()
    if qos:
        conditions = (
            TrafficCondition(
                TrafficConditionKind.RATE_LIMIT_PER_FLOW,
                draw(st.integers(min_value=1, max_value=4000)) * MBPS,
            ),
        )
    return Policy(
        operation=operation,
        profile=osdf.DEFAULT_REGISTRY.profile(draw(_apps)),
        source_region=source,
        destination_region=destination,
        address_space=space,
        priority=draw(st.integers(min_value=1, max_value=500)),
        traffic_conditions=conditions,
    )


@settings(max_examples=200, deadline=None)
@given(policies())
def test_roundtrip_identity(policy: Policy):
    assert parse_policy(render_policy(policy)) == policy


@st.composite
def spaces(draw) -> AddressSpace:
    if draw(st.booleans()):
        return AddressSpace.all_hosts()
    pairs = draw(
        st.sets(
            st.tuples(_names, _names).filter(lambda p: p[0] != p[1]),
            min_size=1,
            max_size=4,
        )
    )
    return AddressSpace.between(pairs)


@settings(max_examples=200, deadline=None)
@given(spaces(), spaces(), spaces())
def test_coverage_is_a_partial_order(a: AddressSpace, b: AddressSpace, c: AddressSpace):
    assert a.is_subset(a)
    if a.is_subset(b) and b.is_subset(a):
        assert a.pairs == b.pairs
    if a.is_subset(b) and b.is_subset(c):
        assert a.is_subset(c)


def test_all_hosts_strictly_covers_every_finite_set():
    wild = AddressSpace.all_hosts()
    finite = AddressSpace.between({("H1", "H2")})
    assert finite.is_subset(wild)
    assert not wild.is_subset(finite)
    assert wild.covers("H7", "H8")
    assert normalize_pair("H2", "H1") == ("H1", "H2")
