from __future__ import annotations

import random
from pathlib import Path

import pytest

import osdf

SCENARIOS = Path(osdf.__file__).parent / "scenarios"


def scenario_path(name: str) -> Path:
    return SCENARIOS / name


@pytest.fixture
def leafspine_config():
    return osdf.load_config(scenario_path("leafspine_site_a.json"))


@pytest.fixture
def two_site_config():
    return osdf.load_config(scenario_path("two_site_it_sales.json"))


@pytest.fixture
def multipath_config():
    return osdf.load_config(scenario_path("multipath_site_c.json"))


@pytest.fixture
def linear_config():
    return osdf.load_config(scenario_path("linear_site_d.json"))


# -- random policy generation (shared by oracle and acceptance tests) -----

APPS = ("WEB", "VIDEO", "VOICE")
REGION_POOL = ("A", "B", "RC", "RD")
HOST_POOL = tuple(f"H{i}" for i in range(1, 9))


def random_policy(rng: random.Random, registry=None) -> osdf.Policy:
    registry = registry or osdf.DEFAULT_REGISTRY
    kind = rng.choice((osdf.OperationKind.ROUTE, osdf.OperationKind.ALERT))
    span = rng.choice((osdf.Span.INTRA, osdf.Span.INTER))
    qos = kind is osdf.OperationKind.ROUTE and rng.random() < 0.25
    operation = osdf.NetworkOperation.from_parts(kind, span, qos)
    if span is osdf.Span.INTRA:
        source = destination = rng.choice(REGION_POOL)
    else:
        source, destination = rng.sample(REGION_POOL, 2)
    if rng.random() < 0.3:
        waypoints = ()
        if rng.random() < 0.3:
            waypoints = (osdf.Waypoint("S1", rng.choice((None, 2))),)
        space = osdf.AddressSpace.all_hosts(waypoints)
    else:
        count = rng.randint(1, 4)
        pairs = set()
        while len(pairs) < count:
            a, b = rng.sample(HOST_POOL, 2)
            pairs.add((a, b))
        space = osdf.AddressSpace.between(pairs)
    conditions = ()
    if qos:
        conditions = (
            osdf.TrafficCondition(
                osdf.TrafficConditionKind.RATE_LIMIT_PER_FLOW,
                rng.choice((100, 200, 500, 1000)) * 1_000_000,
            ),
        )
    return osdf.Policy(
        operation=operation,
        profile=registry.profile(rng.choice(APPS)),
        source_region=source,
        destination_region=destination,
        address_space=space,
        priority=rng.randint(1, 300),
        traffic_conditions=conditions,
    )
