"""Fixed-step simulation of the coupled agent / weight system."""
from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .controller import bank_step, build_bank, build_runtimes
from .graph import GainReport, gain_check, lemma1_pq, min_singular_value, pinned_laplacian
from .plants import get_suite, leader_state, sample_disturbance
from .ppf import TransformConfig, Variant, check_envelope
from .scenario import ScenarioConfig

log = logging.getLogger(__name__)

STATE_LIMIT = 1e9


class NonFiniteError(FloatingPointError):
    pass


def rk4_step(f: Callable, z: np.ndarray, t: float, h: float, k1: np.ndarray | None = None) -> np.ndarray:
    """Classical RK4 step for z' = f(t, z).

    Anything f depends on besides (t, z), such as a held disturbance sample,
    must be fixed by the caller for the duration of the step.
    """
    if not h > 0:
        raise ValueError("step must be positive")
    if k1 is None:
        k1 = f(t, z)
    k2 = f(t + 0.5 * h, z + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, z + 0.5 * h * k2)
    k4 = f(t + h, z + h * k3)
    for stage, k in enumerate((k1, k2, k3, k4), start=1):
        if not np.all(np.isfinite(k)):
            raise NonFiniteError(f"non-finite derivative in RK4 stage {stage} at t={t:.6g}")
    return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@dataclass
class SimLog:
    """Logged rows share the time grid ``t`` (K rows, N agents, n outputs)."""
    t: np.ndarray
    e: np.ndarray                      # (K, N, n)
    rho: np.ndarray                    # (K, N, n)
    delta_bar: np.ndarray              # (N, n)
    delta_under: np.ndarray            # (N, n)
    clamp_margin: float = 1e-6
    x: np.ndarray | None = None        # (K, N, n)
    x0: np.ndarray | None = None       # (K, n)
    u: np.ndarray | None = None        # (K, N, n)
    eps: np.ndarray | None = None      # (K, N, n)
    r: np.ndarray | None = None        # (K, N, n)
    w_norm: np.ndarray | None = None   # (K, N)
    events: list = field(default_factory=list)
    status: str = "completed"
    violation_steps: int = 0           # integration steps with any channel outside the funnel
    clamp_steps: int = 0
    steps_taken: int = 0
    variant: str = ""
    gain_report: GainReport | None = None
    sync_gain: float | None = None     # s_min(L+B)

    @property
    def aborted(self) -> bool:
        return self.status != "completed"

    @property
    def summary(self) -> dict:
        out = {"status": self.status, "rows": int(len(self.t)), "steps": self.steps_taken,
               "t_end": float(self.t[-1]) if len(self.t) else 0.0,
               "violation_steps": self.violation_steps, "clamp_steps": self.clamp_steps}
        if self.x is not None and self.x0 is not None and len(self.t):
            dev = np.abs(self.x[-1] - self.x0[-1][None, :])
            out["final_sync_error"] = float(dev.max())
        if self.w_norm is not None and len(self.t):
            out["max_weight_norm"] = self.w_norm.max(axis=0).tolist()
        if self.u is not None:
            out["control_total_variation"] = chattering_metric(self).tolist()
        return out


def _tc(log_: SimLog) -> TransformConfig:
    return TransformConfig(log_.delta_bar, log_.delta_under, 1.0, Variant.SIGN, log_.clamp_margin)


def envelope_audit(log_: SimLog) -> dict:
    """Per-channel violation and clamp counts over the logged rows."""
    env = check_envelope(log_.e, log_.rho, _tc(log_))
    outside = ~np.asarray(env.inside)
    clamped = np.asarray(env.clamped)
    per_channel = outside.sum(axis=0)
    first = None
    if outside.any():
        k = int(np.argmax(outside.reshape(len(log_.t), -1).any(axis=1)))
        first = float(log_.t[k])
    report = {
        "violations": int(outside.any(axis=(1, 2)).sum()),
        "violations_per_channel": per_channel.tolist(),
        "clamp_events_per_channel": clamped.sum(axis=0).tolist(),
        "first_violation_time": first,
        "min_margin_per_channel": np.asarray(env.margin).min(axis=0).tolist(),
        "min_ratio_headroom": float((1.0 - np.abs(log_.e / log_.rho) / log_.delta_bar).min()),
        "full_rate_violation_steps": log_.violation_steps,
        "full_rate_clamp_steps": log_.clamp_steps,
    }
    if log_.x is not None and log_.x0 is not None and log_.sync_gain:
        # ||x0 1 - x|| <= ||e|| / s_min(L+B) on every logged row
        lhs = np.linalg.norm((log_.x - log_.x0[:, None, :]).reshape(len(log_.t), -1), axis=1)
        rhs = np.linalg.norm(log_.e.reshape(len(log_.t), -1), axis=1) / log_.sync_gain
        report["sync_bound_failures"] = int((lhs > rhs + 1e-9).sum())
    return report


def chattering_metric(log_: SimLog) -> np.ndarray:
    """Total variation of each control channel over the logged rows, shape (N, n)."""
    if log_.u is None or len(log_.u) < 2:
        n_shape = log_.e.shape[1:]
        return np.zeros(n_shape)
    return np.abs(np.diff(log_.u, axis=0)).sum(axis=0)


def run_scenario(cfg: ScenarioConfig, *, decimate: int | None = None) -> SimLog:
    """Integrate the scenario from 0 to its horizon.

    Each RK4 stage evaluates every agent's local law on one immutable
    snapshot of the augmented state (states, then weights in agent order).
    """
    suite = get_suite(cfg.plant)
    g = cfg.graph
    N, n = cfg.n_agents, cfg.node_dim
    lemma = lemma1_pq(g)
    report = gain_check(g, cfg.c, cfg.k, cfg.phi_bound, bounds=cfg.bounds)
    runtimes = build_runtimes(g, lemma.p, [cfg.funnel(i) for i in range(N)],
                              [cfg.transform_config(i) for i in range(N)],
                              [cfg.network(i) for i in range(N)], cfg.c)
    bank = build_bank(runtimes, N)
    v = bank.basis.neuron_count
    nx = N * n
    sampler = sample_disturbance(np.random.default_rng(cfg.seed), N, cfg.effective_hold) if suite.noisy else None
    zero_noise = np.zeros(N)

    def system(t, z, noise):
        X = z[:nx].reshape(N, n)
        W = z[nx:].reshape(N, v, n)
        x0 = np.broadcast_to(leader_state(cfg.leader, t)[0], (n,))
        out = bank_step(bank, X, W, x0, t)
        dz = np.concatenate([suite.all_nodes(X, out[0], t, noise).ravel(), out[1].ravel()])
        return dz, out, x0

    h = cfg.step
    n_steps = int(round(cfg.horizon / h))
    dec = cfg.decimate if decimate is None else decimate
    n_rows = n_steps // dec + 1
    buf = {key: np.full((n_rows, N, n), np.nan) for key in ("x", "u", "e", "eps", "rho", "r")}
    t_log = np.empty(n_rows)
    x0_log = np.empty((n_rows, n))
    w_log = np.empty((n_rows, N))
    events: list = []
    outside_prev = np.zeros((N, n), dtype=bool)
    clamp_prev = np.zeros((N, n), dtype=bool)
    out = SimLog(t=t_log, e=buf["e"], rho=buf["rho"], delta_bar=cfg.delta_bar, delta_under=cfg.delta_under,
                 clamp_margin=cfg.clamp_margin, x=buf["x"], x0=x0_log, u=buf["u"], eps=buf["eps"], r=buf["r"],
                 w_norm=w_log, events=events, variant=cfg.variant.value, gain_report=report,
                 sync_gain=min_singular_value(pinned_laplacian(g)))
    tc = cfg.transform_config()

    z = np.concatenate([cfg.initial_states.ravel(), np.zeros(N * v * n)])
    row = 0
    for step in range(n_steps + 1):
        t = step * h
        noise = sampler.at(t) if sampler is not None else zero_noise
        with np.errstate(over="ignore", invalid="ignore"):
            k1, (U, _, E, eps, r, rho_t, clamped), x0 = system(t, z, noise)
        if not np.all(np.isfinite(k1)):
            _abort(out, events, t, "non-finite vector field")
            break

        outside = ~np.asarray(check_envelope(E, rho_t, tc).inside)
        out.violation_steps += int(outside.any())
        out.clamp_steps += int(clamped.any())
        _transitions(events, t, outside, outside_prev, "envelope_exit", "envelope_reentry")
        _transitions(events, t, clamped, clamp_prev, "clamp_engaged", "clamp_released")
        outside_prev, clamp_prev = outside, clamped

        if step % dec == 0:
            t_log[row] = t
            x0_log[row] = x0
            buf["x"][row] = z[:nx].reshape(N, n)
            buf["u"][row] = U
            buf["e"][row] = E
            buf["eps"][row] = eps
            buf["rho"][row] = rho_t
            buf["r"][row] = r
            w_log[row] = np.linalg.norm(z[nx:].reshape(N, -1), axis=1)
            row += 1
        if step == n_steps:
            break

        try:
            with np.errstate(over="ignore", invalid="ignore"):
                z = rk4_step(lambda tt, zz: system(tt, zz, noise)[0], z, t, h, k1=k1)
        except NonFiniteError as exc:
            _abort(out, events, t, str(exc))
            break
        out.steps_taken = step + 1
        peak = np.abs(z[:nx]).max()
        if not np.all(np.isfinite(z)) or peak > STATE_LIMIT:
            _abort(out, events, t + h, f"state magnitude {peak:.3g} exceeds {STATE_LIMIT:g}")
            break

    if row < n_rows:
        out.t = t_log[:row]
        out.x0 = x0_log[:row]
        out.w_norm = w_log[:row]
        for key, arr in buf.items():
            setattr(out, key, arr[:row])
    return out


def _abort(out: SimLog, events: list, t: float, reason: str) -> None:
    out.status = "aborted"
    events.append({"type": "numeric_abort", "t": float(t), "reason": reason})
    log.warning("numeric abort at t=%.6g: %s", t, reason)


def _transitions(events, t, now, before, on_name, off_name):
    for i, ch in np.argwhere(now & ~before):
        events.append({"type": on_name, "t": float(t), "agent": int(i) + 1, "channel": int(ch) + 1})
    for i, ch in np.argwhere(before & ~now):
        events.append({"type": off_name, "t": float(t), "agent": int(i) + 1, "channel": int(ch) + 1})


def run_pair(cfg: ScenarioConfig, *, decimate: int | None = None) -> dict[str, SimLog]:
    """Sign and erf variants of one scenario with a shared seed, run concurrently."""
    cfgs = {v.value: cfg.with_overrides(variant=v) for v in (Variant.SIGN, Variant.ERF)}
    with ThreadPoolExecutor(max_workers=2) as pool:
        futures = {k: pool.submit(run_scenario, c, decimate=decimate) for k, c in cfgs.items()}
        return {k: f.result() for k, f in futures.items()}


def compare_report(logs: dict[str, SimLog]) -> dict:
    rep = {}
    for name, lg in logs.items():
        audit = envelope_audit(lg)
        rep[name] = {
            "status": lg.status,
            "total_variation": chattering_metric(lg).tolist(),
            "max_abs_eps": np.nanmax(np.abs(lg.eps), axis=0).tolist() if len(lg.t) else [],
            "violations": audit["full_rate_violation_steps"],
        }
    tv_s, tv_e = chattering_metric(logs["sign"]), chattering_metric(logs["erf"])
    rep["erf_lower_tv_per_agent"] = (tv_e.sum(axis=1) < tv_s.sum(axis=1)).tolist()
    return rep


# ---------------------------------------------------------------------------
# output files

def _columns(prefix: str, N: int, n: int) -> list[str]:
    if n == 1:
        return [f"{prefix}{i + 1}" for i in range(N)]
    return [f"{prefix}{i + 1}_{c + 1}" for i in range(N) for c in range(n)]


def _write_csv(path: Path, header: list[str], t: np.ndarray, *blocks: np.ndarray) -> None:
    cols = [t[:, None]] + [b.reshape(len(t), -1) for b in blocks]
    data = np.hstack(cols) if len(t) else np.empty((0, len(header)))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for rec in data:
            w.writerow([format(v, ".17g") for v in rec])


def write_outputs(lg: SimLog, out_dir, cfg: ScenarioConfig | None = None) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _, N, n = lg.e.shape
    x0_cols = ["x0"] if n == 1 else [f"x0_{c + 1}" for c in range(n)]
    _write_csv(out / "states.csv", ["t"] + x0_cols + _columns("x", N, n), lg.t, lg.x0, lg.x)
    _write_csv(out / "controls.csv", ["t"] + _columns("u", N, n), lg.t, lg.u)
    _write_csv(out / "errors.csv", ["t"] + _columns("e", N, n) + _columns("rho", N, n), lg.t, lg.e, lg.rho)
    _write_csv(out / "epsilon.csv", ["t"] + _columns("eps", N, n) + _columns("r", N, n), lg.t, lg.eps, lg.r)
    _write_csv(out / "weights.csv", ["t"] + [f"w{i + 1}" for i in range(N)], lg.t, lg.w_norm)
    with open(out / "events.jsonl", "w") as fh:
        for ev in lg.events:
            fh.write(json.dumps(ev) + "\n")
    report = {
        "scenario": cfg.name if cfg else None,
        "variant": lg.variant,
        "summary": lg.summary,
        "audit": envelope_audit(lg),
        "gain_report": lg.gain_report.as_dict() if lg.gain_report else None,
    }
    with open(out / "report.json", "w") as fh:
        json.dump(report, fh, indent=2)
    return out
