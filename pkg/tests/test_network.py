from __future__ import annotations

import pytest

import osdf
from osdf import FormatError, NotFoundError, ValidationError, config_from_dict

from conftest import scenario_path


def _minimal(**overrides):
    data = {
        "switches": [{"id": "S1"}, {"id": "S2"}],
        "links": [{"a": "S1:1", "b": "S2:1"}],
        "hosts": [{"name": "H1", "attach": "S1:2"}, {"name": "H2", "attach": "S2:2"}],
        "regions": [{"name": "A", "switches": ["S1", "S2"]}],
    }
    data.update(overrides)
    return data


def test_leafspine_config_is_valid(leafspine_config):
    topo = leafspine_config.topology
    assert topo.switches == {"L1", "L2", "L3", "SP1", "SP2"}
    assert sorted(topo.hosts) == ["H1", "H2", "H3", "H4", "H5", "H6"]
    assert len(leafspine_config.regions) == 1
    assert leafspine_config.region("A").member_hosts == frozenset(topo.hosts)


def test_linear_config_is_valid(linear_config):
    topo = linear_config.topology
    assert len(topo.switches) == 40
    assert topo.host("H1").attach.switch == "S1"
    assert topo.host("H40").attach.switch == "S40"
    assert len(topo.links) == 39


def test_default_link_capacity_is_one_gbps(leafspine_config):
    assert all(l.capacity_bps == 1_000_000_000 for l in leafspine_config.topology.links)


def test_link_to_undeclared_switch_rejected():
    with pytest.raises(ValidationError) as err:
        config_from_dict(_minimal(links=[{"a": "S1:1", "b": "S9:1"}]))
    assert "S9" in str(err.value)


def test_port_reuse_rejected():
    data = _minimal(
        links=[{"a": "S1:1", "b": "S2:1"}],
        hosts=[{"name": "H1", "attach": "S1:1"}],
    )
    with pytest.raises(ValidationError):
        config_from_dict(data)


def test_duplicate_region_membership_rejected():
    data = _minimal(
        regions=[
            {"name": "A", "switches": ["S1", "S2"]},
            {"name": "B", "switches": ["S2"]},
        ]
    )
    with pytest.raises(ValidationError):
        config_from_dict(data)


def test_every_switch_needs_a_region():
    data = _minimal(regions=[{"name": "A", "switches": ["S1"]}])
    with pytest.raises(ValidationError):
        config_from_dict(data)


def test_unknown_keys_and_bad_types_are_format_errors():
    with pytest.raises(FormatError):
        config_from_dict(_minimal(extra=[]))
    with pytest.raises(FormatError):
        config_from_dict(_minimal(switches=[{"id": "S1", "x": 1}, {"id": "S2"}]))
    with pytest.raises(FormatError):
        config_from_dict(_minimal(links=[{"a": "S1:1"}]))
    with pytest.raises(FormatError):
        config_from_dict({"switches": []})


def test_bad_json_file_is_a_format_error(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(FormatError):
        osdf.load_config(path)


def test_nonpositive_capacity_rejected():
    with pytest.raises(ValidationError):
        config_from_dict(_minimal(links=[{"a": "S1:1", "b": "S2:1", "capacity_mbps": 0}]))


def test_region_partition_covers_every_switch(two_site_config):
    total = sum(len(r.member_devices) for r in two_site_config.regions)
    assert total == len(two_site_config.topology.switches)


def test_region_of_host_and_switch(leafspine_config, two_site_config):
    assert leafspine_config.region_of("H1").name == "A"
    assert leafspine_config.region_of("SP1").name == "A"
    assert two_site_config.region_of("Sales-S1").name == "Sales"
    assert two_site_config.region_of("ITH2").name == "IT"
    with pytest.raises(NotFoundError):
        leafspine_config.region_of("nope")


def test_classify_flow_span(leafspine_config, two_site_config):
    intra = leafspine_config.classify_flow_span("H1", "H3")
    assert intra.is_intra and intra.source_region == "A"
    inter = two_site_config.classify_flow_span("ITH1", "SalesH1")
    assert not inter.is_intra
    assert (inter.source_region, inter.destination_region) == ("IT", "Sales")
    self_span = leafspine_config.classify_flow_span("H1", "H1")
    assert self_span.is_intra


def test_classify_flow_span_symmetry(two_site_config):
    forward = two_site_config.classify_flow_span("ITH1", "SalesH1")
    back = two_site_config.classify_flow_span("SalesH1", "ITH1")
    assert (forward.source_region, forward.destination_region) == (
        back.destination_region,
        back.source_region,
    )


def test_host_addresses_are_deterministic_and_unique(leafspine_config):
    hosts = leafspine_config.topology.hosts
    addresses = [h.address for h in hosts.values()]
    assert len(set(addresses)) == len(addresses)
    again = osdf.load_config(scenario_path("leafspine_site_a.json"))
    assert [h.address for h in again.topology.hosts.values()] == addresses


def test_multigraph_parallel_links_allowed():
    data = _minimal(
        links=[
            {"a": "S1:1", "b": "S2:1"},
            {"a": "S1:3", "b": "S2:3", "capacity_mbps": 200},
        ]
    )
    config = config_from_dict(data)
    best = config.topology.best_link("S1", "S2")
    assert best is not None and best.port_on("S1") == 1
