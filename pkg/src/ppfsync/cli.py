"""Command-line front end: ``ppfsync {run,compare,check-gains,validate,list-examples}``."""
from __future__ import annotations

import json
import logging
import os
import sys
from pathlib import Path

import click
import numpy as np

from .engine import chattering_metric, compare_report, envelope_audit, run_pair, run_scenario, write_outputs
from .graph import GraphError, gain_check, lemma1_pq
from .scenario import ConfigError, ScenarioConfig, load_config, preset_names, preset_path

EXIT_OK, EXIT_CONFIG, EXIT_VIOLATION, EXIT_ABORT = 0, 1, 2, 3
ENV_OUT = "PPF_SYNC_OUT"


def exit_code(aborted: bool, violations: int) -> int:
    if aborted:
        return EXIT_ABORT
    return EXIT_VIOLATION if violations else EXIT_OK


def _load(scenario: str, **overrides) -> ScenarioConfig:
    try:
        cfg = load_config(scenario)
        if any(v is not None for v in overrides.values()):
            cfg = cfg.with_overrides(**overrides)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    return cfg


def _out_dir(out: str | None, cfg: ScenarioConfig) -> Path:
    if out:
        return Path(out)
    root = os.environ.get(ENV_OUT) or "runs"
    return Path(root) / cfg.name


_overrides = [
    click.option("--out", type=click.Path(file_okay=False), help=f"Output directory (default ${ENV_OUT}/<name> or runs/<name>)."),
    click.option("--seed", type=int, help="Override the disturbance seed."),
    click.option("--step", type=float, help="Override the RK4 step h in seconds."),
    click.option("--horizon", type=float, help="Override the horizon T in seconds."),
    click.option("--decimate", type=click.IntRange(min=1), help="Log every n-th step (1 logs every step)."),
]


def _with_overrides(fn):
    for opt in reversed(_overrides):
        fn = opt(fn)
    return fn


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log warnings and progress to stderr.")
def main(verbose: bool) -> None:
    """Leader-follower synchronization with prescribed performance funnels."""
    logging.basicConfig(level=logging.INFO if verbose else logging.ERROR, format="%(levelname)s %(message)s")


@main.command()
@click.argument("scenario")
@_with_overrides
@click.option("--transform", "variant", type=click.Choice(["sign", "erf"]), help="Override the transform variant.")
def run(scenario, out, seed, step, horizon, decimate, variant):
    """Simulate SCENARIO (a file or preset name) and write CSVs plus report.json."""
    cfg = _load(scenario, seed=seed, step=step, horizon=horizon, decimate=decimate, variant=variant)
    lg = run_scenario(cfg)
    dest = write_outputs(lg, _out_dir(out, cfg), cfg)
    audit = envelope_audit(lg)
    tv = chattering_metric(lg).sum(axis=1)
    click.echo(f"{cfg.name} [{lg.variant}] status={lg.status} t_end={lg.summary['t_end']:.6g} "
               f"violation_steps={lg.violation_steps} clamp_steps={lg.clamp_steps}")
    click.echo("TV(u) per agent: " + " ".join(f"{v:.6g}" for v in tv))
    if audit["first_violation_time"] is not None:
        click.echo(f"first logged violation at t={audit['first_violation_time']:.6g}")
    click.echo(f"outputs: {dest}")
    sys.exit(exit_code(lg.aborted, lg.violation_steps))


@main.command()
@click.argument("scenario")
@_with_overrides
def compare(scenario, out, seed, step, horizon, decimate):
    """Run the sign and erf variants of SCENARIO with a shared seed."""
    cfg = _load(scenario, seed=seed, step=step, horizon=horizon, decimate=decimate)
    logs = run_pair(cfg)
    dest = _out_dir(out, cfg)
    for name, lg in logs.items():
        write_outputs(lg, dest / name, cfg.with_overrides(variant=name))
    rep = compare_report(logs)
    dest.mkdir(parents=True, exist_ok=True)
    (dest / "compare.json").write_text(json.dumps(rep, indent=2))

    click.echo(f"{'agent':>5} {'TV sign':>14} {'TV erf':>14} {'max|eps| sign':>14} {'max|eps| erf':>14}")
    tv = {k: chattering_metric(v).sum(axis=1) for k, v in logs.items()}
    me = {k: np.asarray(rep[k]["max_abs_eps"]).reshape(cfg.n_agents, -1).max(axis=1)
          if rep[k]["max_abs_eps"] else np.full(cfg.n_agents, np.nan) for k in logs}
    for i in range(cfg.n_agents):
        click.echo(f"{i + 1:>5} {tv['sign'][i]:>14.6g} {tv['erf'][i]:>14.6g} "
                   f"{me['sign'][i]:>14.6g} {me['erf'][i]:>14.6g}")
    for name, lg in logs.items():
        click.echo(f"{name}: status={lg.status} violation_steps={lg.violation_steps}")
    click.echo(f"outputs: {dest}")
    aborted = any(lg.aborted for lg in logs.values())
    sys.exit(exit_code(aborted, sum(lg.violation_steps for lg in logs.values())))


@main.command("check-gains")
@click.argument("scenario")
def check_gains(scenario):
    """Print the gain report for SCENARIO's graph and gains."""
    cfg = _load(scenario)
    try:
        lemma = lemma1_pq(cfg.graph)
        rep = gain_check(cfg.graph, cfg.c, cfg.k, cfg.phi_bound, bounds=cfg.bounds)
    except GraphError as exc:
        click.echo(f"graph error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    click.echo(f"scenario         {cfg.name}")
    click.echo(f"q                {np.array2string(lemma.q, precision=6)}")
    click.echo(f"s_min(Q)         {rep.sigma_min_Q:.10g}   (min eig Q = {rep.min_eig_Q:.10g}"
               f"{', Q is NOT positive definite' if rep.min_eig_Q <= 0 else ''})")
    click.echo(f"c, k, phi_M      {rep.c:g}, {rep.k:g}, {rep.phi_m:.6g}")
    click.echo(f"k required       {rep.k_required:.10g}   (k / k_required = {rep.k_ratio:.4g})")
    click.echo(f"c condition      as stated: {_yn(rep.c_condition_stated)}   "
               f"H positive definite: {_yn(rep.c_condition_h_matrix)}   "
               f"squared form: {_yn(rep.c_condition_squared)}")
    click.echo(f"min eig H        {rep.min_eig_H:.6g}")
    if rep.epsilon_bound is not None:
        click.echo(f"h                {np.array2string(rep.h_vector, precision=6)}")
        click.echo(f"||eps|| bound    {rep.epsilon_bound:.6g}")
        click.echo(f"||W~|| bound     {rep.weight_bound:.6g}")
    else:
        click.echo("thresholds       need a [bounds] section")


def _yn(flag: bool) -> str:
    return "yes" if flag else "no"


@main.command()
@click.argument("scenarios", nargs=-1, required=True)
def validate(scenarios):
    """Check one or more scenario files without running them."""
    bad = 0
    for path in scenarios:
        try:
            cfg = load_config(path)
        except ConfigError as exc:
            click.echo(f"{path}: INVALID {exc}")
            bad += 1
        else:
            click.echo(f"{path}: ok ({cfg.name}, {cfg.n_agents} agents, dimension {cfg.node_dim})")
    sys.exit(EXIT_CONFIG if bad else EXIT_OK)


@main.command("list-examples")
def list_examples():
    """List the bundled scenario presets."""
    for name in preset_names():
        click.echo(f"{name:<14} {preset_path(name)}")


if __name__ == "__main__":
    main()
