from __future__ import annotations

import pytest

import osdf
from osdf import (
    ForwardToPort,
    LogAndDrop,
    NoPathError,
    NotFoundError,
    PolicyNotApplicableError,
    UnknownApplicationError,
    Waypoint,
    build_selector,
    compile_flow,
    compile_policy,
    config_from_dict,
    parse_policy,
    select_path,
)


def test_build_selector_web(leafspine_config):
    match = build_selector(osdf.DEFAULT_REGISTRY.profile("WEB"), "H1", "H3", leafspine_config)
    assert match.transport is osdf.Transport.TCP
    assert match.dst_port == 80
    assert match.src_host == "H1" and match.dst_host == "H3"
    assert match.src_addr != match.dst_addr


def test_build_selector_voice_uses_registry_template(leafspine_config):
    match = build_selector(osdf.DEFAULT_REGISTRY.profile("VOICE"), "H1", "H2", leafspine_config)
    assert (match.transport, match.dst_port) == (osdf.Transport.UDP, 5060)


def test_build_selector_unknown_application(leafspine_config):
    bogus = osdf.TrafficProfile("NOSUCH", osdf.Transport.TCP, osdf.TrafficType.BEST_EFFORT)
    with pytest.raises(UnknownApplicationError):
        build_selector(bogus, "H1", "H2", leafspine_config)


def test_linear_path_visits_all_forty_switches(linear_config):
    path = select_path(linear_config, "H1", "H40")
    assert path.switches == tuple(f"S{i}" for i in range(1, 41))
    assert path.node_sequence()[0] == "H1"
    assert path.node_sequence()[-1] == "H40"


def test_waypoint_forces_the_primary_path(multipath_config):
    path = select_path(multipath_config, "H1", "H2", (Waypoint("S3", 2),))
    assert path.node_sequence() == ("H1", "S1", "S2", "S3", "S7", "S10", "H2")
    assert path.egress_at("S3") == 2


def test_backup_waypoint_routes_through_s6(multipath_config):
    path = select_path(multipath_config, "H1", "H2", (Waypoint("S6", 4),))
    assert path.node_sequence() == ("H1", "S1", "S5", "S6", "S9", "S10", "H2")
    assert path.egress_at("S6") == 4


def test_unconstrained_path_prefers_fewest_hops(multipath_config):
    path = select_path(multipath_config, "H1", "H2")
    assert path.switches == ("S1", "S4", "S8", "S10")


def test_lexicographic_tie_break(leafspine_config):
    path = select_path(leafspine_config, "H1", "H3")
    assert path.switches == ("L1", "SP1", "L2")


def test_single_switch_path(leafspine_config):
    path = select_path(leafspine_config, "H1", "H2")
    assert len(path.hops) == 1
    hop = path.hops[0]
    assert hop.switch == "L1"
    assert (hop.ingress_port, hop.egress_port) == (3, 4)


def test_unknown_waypoint_device(multipath_config):
    with pytest.raises(NotFoundError):
        select_path(multipath_config, "H1", "H2", (Waypoint("S99"),))


def test_disconnected_target_raises_no_path():
    config = config_from_dict(
        {
            "switches": [{"id": "S1"}, {"id": "S2"}, {"id": "S3"}],
            "links": [{"a": "S1:1", "b": "S2:1"}],
            "hosts": [
                {"name": "H1", "attach": "S1:2"},
                {"name": "H2", "attach": "S3:1"},
            ],
            "regions": [{"name": "A", "switches": ["S1", "S2", "S3"]}],
        }
    )
    with pytest.raises(NoPathError):
        select_path(config, "H1", "H2")
    with pytest.raises(NoPathError):
        select_path(config, "H1", "H1", (Waypoint("S3"),))


def test_waypoint_port_without_link_raises_no_path(multipath_config):
    with pytest.raises(NoPathError):
        select_path(multipath_config, "H1", "H2", (Waypoint("S2", 9),))


def test_rule_count_equals_path_length(linear_config):
    policy = parse_policy("route WEB in D")
    rules = compile_policy(policy, "H1", "H40", linear_config)
    path = select_path(linear_config, "H1", "H40")
    assert len(rules) == len(path.switches) == 40


def test_rules_follow_path_egress_ports(multipath_config):
    policy = parse_policy("route WEB in C priority 100 via S3:2")
    compiled = compile_flow(policy, "H1", "H2", multipath_config)
    assert compiled.path is not None
    for rule, hop in zip(compiled.rules, compiled.path.hops):
        assert rule.switch == hop.switch
        assert rule.action == ForwardToPort(hop.egress_port)
        assert rule.priority == 100


def test_qos_route_attaches_meter_to_every_rule(two_site_config):
    policy = parse_policy("route WEB from IT to Sales ratelimit 200mbps")
    rules = compile_policy(policy, "ITH1", "SalesH1", two_site_config)
    assert rules
    assert all(r.meter is not None and r.meter.rate_bps == 200_000_000 for r in rules)


def test_alert_compiles_to_single_ingress_rule(leafspine_config):
    policy = parse_policy("alert VIDEO in A priority 200")
    rules = compile_policy(policy, "H4", "H2", leafspine_config)
    assert len(rules) == 1
    rule = rules[0]
    assert rule.switch == "L2"  # H4's attachment switch
    assert rule.action == LogAndDrop()
    assert rule.priority == 200


def test_span_mismatch_not_applicable(two_site_config):
    intra = parse_policy("route WEB in IT")
    with pytest.raises(PolicyNotApplicableError):
        compile_policy(intra, "ITH1", "SalesH1", two_site_config)


def test_address_space_mismatch_not_applicable(leafspine_config):
    policy = parse_policy("route WEB in A between (H1,H3)")
    with pytest.raises(PolicyNotApplicableError):
        compile_policy(policy, "H1", "H2", leafspine_config)


def test_inter_site_policy_applies_in_both_directions(two_site_config):
    policy = parse_policy("route WEB from IT to Sales")
    forward = compile_policy(policy, "ITH1", "SalesH1", two_site_config)
    back = compile_policy(policy, "SalesH1", "ITH1", two_site_config)
    assert [r.switch for r in back] == [r.switch for r in forward][::-1]


def test_include_reverse_mirrors_match_and_ports(linear_config):
    policy = parse_policy("route WEB in D")
    rules = compile_policy(policy, "H1", "H40", linear_config, src_port=12345, include_reverse=True)
    assert len(rules) == 80
    forward, back = rules[:40], rules[40:]
    assert back[0].switch == "S40"
    assert back[0].match.src_host == "H40"
    assert back[0].match.src_port == 80
    assert back[0].match.dst_port == 12345
    # the reverse path's last rule hands the packet back to H1's access port
    assert back[-1].switch == "S1"
    assert back[-1].action == ForwardToPort(1)


def test_compile_is_deterministic(multipath_config):
    policy = parse_policy("route WEB in C priority 100 via S3:2")
    a = compile_flow(policy, "H1", "H2", multipath_config)
    b = compile_flow(policy, "H1", "H2", multipath_config)
    assert a == b


def test_unresolvable_host_in_address_space(leafspine_config):
    policy = parse_policy("route WEB in A between (H1,H3),(H1,HX)").with_id(4)
    with pytest.raises(osdf.UnresolvableHostError) as err:
        compile_policy(policy, "H1", "H3", leafspine_config)
    assert err.value.policy_id == 4
