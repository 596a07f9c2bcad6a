"""Administrator command line: policy CRUD, conflict checks, and scenarios.

Exit codes: 0 on success, 1 on usage errors, 2 on domain errors (bad policy
text, missing ids, unreadable or invalid files).  Results go to stdout,
diagnostics to stderr.
"""

from __future__ import annotations

import json
import os
import sys
from typing import Sequence

import click

from .compiler import compile_policy
from .conflicts import detect_all
from .errors import OsdfError, PolicyNotApplicableError
from .network import load_config
from .policy import DEFAULT_REGISTRY, parse_policy, render_policy
from .simulator import FlowRequest, Mode, load_script, run_scenario, winning_policy
from .store import PolicyStore


def _load_store(path: str) -> PolicyStore:
    if os.path.exists(path):
        return PolicyStore.load(path)
    return PolicyStore()


@click.group()
def cli() -> None:
    """Intent-based policy engine and flow-level network simulator."""


@cli.group()
def policy() -> None:
    """Manage the active policy set."""


@policy.command("add")
@click.argument("statement")
@click.option("--store", "store_path", required=True, type=click.Path(), help="Policy store file.")
def policy_add(statement: str, store_path: str) -> None:
    """Parse STATEMENT and append it to the store."""
    store = _load_store(store_path)
    assigned = store.add(parse_policy(statement))
    store.save(store_path)
    click.echo(assigned)


@policy.command("list")
@click.option("--store", "store_path", required=True, type=click.Path(exists=True))
def policy_list(store_path: str) -> None:
    """Print every stored policy as '<id> <canonical statement>'."""
    store = PolicyStore.load(store_path)
    for policy_id in store.ids():
        click.echo(f"{policy_id} {render_policy(store.get(policy_id))}")


@policy.command("remove")
@click.argument("policy_id", type=int)
@click.option("--store", "store_path", required=True, type=click.Path(exists=True))
def policy_remove(policy_id: int, store_path: str) -> None:
    """Delete the policy with POLICY_ID from the store."""
    store = PolicyStore.load(store_path)
    removed = store.remove(policy_id)
    store.save(store_path)
    click.echo(f"removed {policy_id} {render_policy(removed)}")


@cli.command()
@click.option("--store", "store_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="Resolve host names against this network config.")
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
def conflicts(store_path: str, config_path: str | None, as_json: bool) -> None:
    """Detect conflicts between stored policies and print recommendations."""
    store = PolicyStore.load(store_path)
    config = load_config(config_path) if config_path else None
    reports = detect_all(store, config)
    if as_json:
        click.echo(json.dumps([r.to_dict() for r in reports], sort_keys=True))
        return
    for report in reports:
        click.echo(report.render())


@cli.command("rules-dump")
@click.argument("src")
@click.argument("dst")
@click.argument("app")
@click.option("--store", "store_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
def rules_dump(src: str, dst: str, app: str, store_path: str, config_path: str, as_json: bool) -> None:
    """Compile the winning policy for an SRC to DST flow of APP traffic."""
    store = PolicyStore.load(store_path)
    config = load_config(config_path)
    template = DEFAULT_REGISTRY.template(app)
    request = FlowRequest(src, dst, template.transport, template.dst_port, demand_bps=1)
    winner = winning_policy(store, request, config)
    if winner is None:
        raise PolicyNotApplicableError(f"no active policy applies to {src}->{dst} {app} traffic")
    rules = compile_policy(winner, src, dst, config)
    if as_json:
        click.echo(
            json.dumps(
                {
                    "policy": winner.id,
                    "rules": [rule.render() for rule in rules],
                },
                sort_keys=True,
            )
        )
        return
    for rule in rules:
        click.echo(rule.render())


@cli.command("sim-run")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--store", "store_path", required=True, type=click.Path(exists=True))
@click.option("--script", "script_path", required=True, type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(["osdf", "reactive", "both"]), default="osdf",
              show_default=True)
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
def sim_run(config_path: str, store_path: str, script_path: str, mode: str, as_json: bool) -> None:
    """Replay a flow script and print message counts and flow rates."""
    config = load_config(config_path)
    store = PolicyStore.load(store_path)
    script = load_script(script_path)
    modes = [Mode.OSDF_PREINSTALL, Mode.REACTIVE_BASELINE] if mode == "both" else [Mode(mode)]

    results = {}
    for m in modes:
        log, report = run_scenario(config, store, script, m)
        results[m.value] = (log, report)

    if as_json:
        payload = {
            name: {
                "counts": log.counts(),
                "flow_rates_bps": report.to_dict()["flow_rates_bps"],
                "events": [json.loads(e.to_json()) for e in log.events],
            }
            for name, (log, report) in results.items()
        }
        click.echo(json.dumps({"modes": payload}, sort_keys=True))
        return

    header = ["mode"] + list(results[modes[0].value][0].counts())
    click.echo("  ".join(f"{h:>14}" if h != "mode" else f"{h:<9}" for h in header))
    for name, (log, _) in results.items():
        counts = log.counts()
        cells = [f"{name:<9}"] + [f"{counts[k]:>14}" for k in counts]
        click.echo("  ".join(cells))
    for name, (_, report) in results.items():
        for flow_id in sorted(report.flow_rates_bps):
            rate = report.flow_rates_bps[flow_id] / 1_000_000
            click.echo(f"{name} flow {flow_id} rate_mbps={rate:.3f}")


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point with the documented exit-code contract."""
    try:
        cli.main(args=list(argv) if argv is not None else None, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return 1
    except OsdfError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
