"""Scenario description and its TOML file format.

File layout (node indices are 1-based in the file)::

    [scenario]  name, plant, horizon, step, seed, decimate, hold_interval
    [graph]     nodes, edges = [[from, to, weight], ...], pinning = { "3" = 1.0 }
    [leader]    kind = "constant" | "sinusoid", value | amplitude + frequency
    [initial]   states = [...]            # one entry (scalar or list) per node
    [funnel]    rho0, rho_inf, ell        # scalar, per node, or per node per output
    [transform] variant, delta_bar, delta_under, xi, clamp_margin
    [gains]     c, k, pi
    [basis]     kind, neurons, range = [lo, hi], width
    [bounds]    optional: phi_m, alpha_m, w_m, f_m, w_ideal_m, sigma_max_lambda
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .approximator import AdaptiveNetwork, BasisKind, BasisSpec, grid_rbf
from .graph import BoundInputs, Digraph, GraphError, from_edges, lemma1_pq, pinned_laplacian
from .plants import LeaderKind, LeaderSpec, SUITES, get_suite, leader_state
from .ppf import PerformanceFunction, TransformConfig, Variant, check_envelope, rho

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    plant: str
    graph: Digraph
    leader: LeaderSpec
    initial_states: np.ndarray           # (N, n)
    rho0: np.ndarray                     # (N, n)
    rho_inf: np.ndarray
    ell: np.ndarray
    delta_bar: np.ndarray                # (N, n)
    delta_under: np.ndarray
    xi: float
    variant: Variant
    c: float
    k: float
    pi: np.ndarray                       # (N,)
    basis_kind: BasisKind = BasisKind.RBF
    neurons: int = 3
    center_range: tuple = (-4.0, 4.0)
    width: float = 4.0
    step: float = 1e-3
    horizon: float = 10.0
    seed: int = 0
    hold_interval: float | None = None   # None: one draw per integration step
    decimate: int = 10
    clamp_margin: float = 1e-6
    phi_m: float | None = None
    bounds: BoundInputs | None = None
    output_dir: str | None = None
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def n_agents(self) -> int:
        return self.graph.n

    @property
    def node_dim(self) -> int:
        return self.initial_states.shape[1]

    @property
    def effective_hold(self) -> float:
        return self.step if self.hold_interval is None else self.hold_interval

    def funnel(self, i: int) -> PerformanceFunction:
        return PerformanceFunction(self.rho0[i], self.rho_inf[i], self.ell[i])

    def transform_config(self, i: int | None = None, variant: Variant | None = None) -> TransformConfig:
        sl = slice(None) if i is None else i
        return TransformConfig(self.delta_bar[sl], self.delta_under[sl], self.xi,
                               variant or self.variant, self.clamp_margin)

    def basis(self) -> BasisSpec:
        lo, hi = self.center_range
        if self.basis_kind is BasisKind.RBF:
            return grid_rbf(self.neurons, lo, hi, self.width, self.node_dim)
        slopes = np.ones((self.neurons, self.node_dim))
        biases = np.linspace(lo, hi, self.neurons)
        return BasisSpec(BasisKind.SIGMOID, slopes, biases)

    def network(self, i: int) -> AdaptiveNetwork:
        return AdaptiveNetwork.zeros(self.basis(), self.node_dim, float(self.pi[i]), self.k)

    @property
    def phi_bound(self) -> float:
        return self.phi_m if self.phi_m is not None else math.sqrt(self.neurons)

    def with_overrides(self, **kw) -> "ScenarioConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        if "variant" in kw:
            kw["variant"] = Variant(kw["variant"])
        cfg = replace(self, **kw)
        validate_config(cfg)
        return cfg


# ---------------------------------------------------------------------------
# parsing

_SECTIONS = {
    "scenario": {"name", "plant", "horizon", "step", "seed", "decimate", "hold_interval"},
    "graph": {"nodes", "edges", "pinning"},
    "leader": {"kind", "value", "amplitude", "frequency"},
    "initial": {"states"},
    "funnel": {"rho0", "rho_inf", "ell"},
    "transform": {"variant", "delta_bar", "delta_under", "xi", "clamp_margin"},
    "gains": {"c", "k", "pi"},
    "basis": {"kind", "neurons", "range", "width"},
    "bounds": {"phi_m", "alpha_m", "w_m", "f_m", "w_ideal_m", "sigma_max_lambda", "delta_bar"},
}
_REQUIRED = ("scenario", "graph", "initial", "funnel", "transform", "gains")


def _num(sec: dict, key: str, where: str, default=None, positive=False, integer=False):
    if key not in sec:
        if default is None:
            raise ConfigError(f"{where}.{key}", "missing required value")
        return default
    v = sec[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key}", f"expected a number, got {v!r}")
    if integer and not isinstance(v, int):
        raise ConfigError(f"{where}.{key}", f"expected an integer, got {v!r}")
    if not math.isfinite(v):
        raise ConfigError(f"{where}.{key}", "must be finite")
    if positive and v <= 0:
        raise ConfigError(f"{where}.{key}", f"must be positive, got {v}")
    return v


def _per_channel(value, n_agents: int, dim: int, where: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(where, f"expected a number or nested list of numbers, got {value!r}") from None
    if arr.ndim == 0:
        out = np.full((n_agents, dim), float(arr))
    elif arr.shape == (n_agents,):
        out = np.repeat(arr[:, None], dim, axis=1)
    elif arr.shape == (n_agents, dim):
        out = arr.copy()
    else:
        raise ConfigError(where, f"shape {arr.shape} is not scalar, ({n_agents},) or ({n_agents}, {dim})")
    if not np.all(np.isfinite(out)):
        raise ConfigError(where, "values must be finite")
    return out


def parse_config(doc: dict, source: str = "<config>") -> ScenarioConfig:
    for sec in doc:
        if sec not in _SECTIONS:
            raise ConfigError(sec, f"unknown section [{sec}]")
        if not isinstance(doc[sec], dict):
            raise ConfigError(sec, "expected a table")
        for key in doc[sec]:
            if key not in _SECTIONS[sec]:
                raise ConfigError(f"{sec}.{key}", "unknown key")
    for sec in _REQUIRED:
        if sec not in doc:
            raise ConfigError(sec, f"missing section [{sec}]")

    s = doc["scenario"]
    plant = s.get("plant")
    if plant not in SUITES:
        raise ConfigError("scenario.plant", f"unknown plant suite {plant!r}; known: {sorted(SUITES)}")
    suite = get_suite(plant)
    step = _num(s, "step", "scenario", positive=True)
    horizon = _num(s, "horizon", "scenario", positive=True)
    seed = _num(s, "seed", "scenario", default=0, integer=True)
    decimate = _num(s, "decimate", "scenario", default=10, integer=True)
    hold = _num(s, "hold_interval", "scenario", positive=True) if "hold_interval" in s else None

    gsec = doc["graph"]
    n_agents = _num(gsec, "nodes", "graph", integer=True, positive=True)
    edges = gsec.get("edges", [])
    if not isinstance(edges, list):
        raise ConfigError("graph.edges", "expected a list of [from, to, weight]")
    triples = []
    for idx, edge in enumerate(edges):
        if not (isinstance(edge, list) and len(edge) == 3):
            raise ConfigError(f"graph.edges[{idx}]", f"expected [from, to, weight], got {edge!r}")
        src, dst, w = edge
        where = f"graph.edges[{idx}]"
        if not (isinstance(src, int) and isinstance(dst, int)):
            raise ConfigError(where, "node indices must be integers")
        if not (1 <= src <= n_agents and 1 <= dst <= n_agents):
            raise ConfigError(where, f"node index out of range 1..{n_agents} in {edge!r}")
        if src == dst:
            raise ConfigError(where, f"self-edge on node {src} is not allowed")
        if isinstance(w, bool) or not isinstance(w, (int, float)) or not w > 0:
            raise ConfigError(where, f"weight must be a positive number, got {w!r}")
        triples.append((src - 1, dst - 1, w))
    pins = gsec.get("pinning", {})
    if not isinstance(pins, dict):
        raise ConfigError("graph.pinning", "expected a table of node = gain")
    pin_pairs = []
    for key, gain in pins.items():
        try:
            node = int(key)
        except ValueError:
            raise ConfigError(f"graph.pinning.{key}", "node key must be an integer") from None
        if not 1 <= node <= n_agents:
            raise ConfigError(f"graph.pinning.{key}", f"node index out of range 1..{n_agents}")
        if isinstance(gain, bool) or not isinstance(gain, (int, float)) or gain < 0:
            raise ConfigError(f"graph.pinning.{key}", f"gain must be a nonnegative number, got {gain!r}")
        pin_pairs.append((node - 1, gain))
    try:
        graph = from_edges(n_agents, triples, pin_pairs)
    except (GraphError, TypeError, ValueError) as exc:
        raise ConfigError("graph", str(exc)) from None

    dim = suite.node_dim
    lsec = doc.get("leader")
    if lsec is None:
        if suite.default_leader is None:
            raise ConfigError("leader", "missing section [leader] and the plant suite has no default")
        leader = suite.default_leader
    else:
        kind = lsec.get("kind")
        if kind not in ("constant", "sinusoid"):
            raise ConfigError("leader.kind", f"expected 'constant' or 'sinusoid', got {kind!r}")
        if kind == "constant":
            if "value" not in lsec:
                raise ConfigError("leader.value", "missing required value")
            value = lsec["value"]
            leader = LeaderSpec(LeaderKind.CONSTANT, value=tuple(value) if isinstance(value, list) else value)
        else:
            amp, freq = lsec.get("amplitude"), lsec.get("frequency")
            if amp is None or freq is None:
                raise ConfigError("leader.amplitude" if amp is None else "leader.frequency",
                                  "missing required value")
            leader = LeaderSpec(LeaderKind.SINUSOID,
                                amplitude=tuple(amp) if isinstance(amp, list) else amp,
                                frequency=tuple(freq) if isinstance(freq, list) else freq)
        try:
            x0 = np.atleast_1d(leader_state(leader, 0.0)[0])
        except (TypeError, ValueError):
            raise ConfigError("leader", "leader parameters must be numbers or lists of numbers") from None
        if x0.size not in (1, dim):
            raise ConfigError("leader", f"leader dimension {x0.size} does not match node dimension {dim}")

    states = doc["initial"].get("states")
    if states is None:
        raise ConfigError("initial.states", "missing required value")
    try:
        x_init = np.asarray(states, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError("initial.states", "expected numbers") from None
    if x_init.ndim == 1 and dim == 1:
        x_init = x_init[:, None]
    if x_init.shape != (n_agents, dim):
        raise ConfigError("initial.states", f"expected {n_agents} states of dimension {dim}, got shape {x_init.shape}")

    f = doc["funnel"]
    rho0 = _per_channel(f.get("rho0", 7.0), n_agents, dim, "funnel.rho0")
    rho_inf = _per_channel(f.get("rho_inf", 0.05), n_agents, dim, "funnel.rho_inf")
    ell = _per_channel(f.get("ell", 7.0), n_agents, dim, "funnel.ell")

    t = doc["transform"]
    variant = t.get("variant", "erf")
    if variant not in ("sign", "erf"):
        raise ConfigError("transform.variant", f"expected 'sign' or 'erf', got {variant!r}")
    db = _per_channel(t.get("delta_bar", 7.0), n_agents, dim, "transform.delta_bar")
    du = _per_channel(t.get("delta_under", 1.0), n_agents, dim, "transform.delta_under")
    xi = _num(t, "xi", "transform", default=20.0, positive=True)
    clamp = _num(t, "clamp_margin", "transform", default=1e-6, positive=True)

    gs = doc["gains"]
    c = _num(gs, "c", "gains", positive=True)
    k = _num(gs, "k", "gains", positive=True)
    pi_raw = gs.get("pi")
    if pi_raw is None:
        raise ConfigError("gains.pi", "missing required value")
    try:
        pi = np.broadcast_to(np.asarray(pi_raw, dtype=float), (n_agents,)).copy()
    except (TypeError, ValueError):
        raise ConfigError("gains.pi", f"expected a number or {n_agents} numbers") from None

    bs = doc.get("basis", {})
    kind = bs.get("kind", "rbf")
    if kind not in ("rbf", "sigmoid"):
        raise ConfigError("basis.kind", f"expected 'rbf' or 'sigmoid', got {kind!r}")
    neurons = _num(bs, "neurons", "basis", default=3, integer=True)
    rng_ = bs.get("range", [-4.0, 4.0])
    if not (isinstance(rng_, list) and len(rng_) == 2 and all(isinstance(v, (int, float)) for v in rng_)):
        raise ConfigError("basis.range", "expected [lo, hi]")
    width = _num(bs, "width", "basis", default=4.0)

    phi_m, bounds = None, None
    if "bounds" in doc:
        b = doc["bounds"]
        if "phi_m" in b:
            phi_m = _num(b, "phi_m", "bounds", positive=True)
        keys = ("alpha_m", "w_m", "f_m", "w_ideal_m", "sigma_max_lambda")
        present = [key for key in keys if key in b]
        if present and len(present) != len(keys):
            missing = next(key for key in keys if key not in b)
            raise ConfigError(f"bounds.{missing}", "all of alpha_m, w_m, f_m, w_ideal_m, sigma_max_lambda are needed")
        if present:
            vals = {key: _num(b, key, "bounds", positive=True) for key in keys}
            delta_max = _num(b, "delta_bar", "bounds", default=float(db.max()), positive=True)
            bounds = BoundInputs(vals["alpha_m"], vals["w_m"], vals["f_m"], vals["w_ideal_m"],
                                 delta_max, vals["sigma_max_lambda"])

    cfg = ScenarioConfig(
        name=s.get("name", Path(source).stem), plant=plant, graph=graph, leader=leader,
        initial_states=x_init, rho0=rho0, rho_inf=rho_inf, ell=ell, delta_bar=db, delta_under=du,
        xi=float(xi), variant=Variant(variant), c=float(c), k=float(k), pi=pi,
        basis_kind=BasisKind(kind), neurons=int(neurons), center_range=(float(rng_[0]), float(rng_[1])),
        width=float(width), step=float(step), horizon=float(horizon), seed=int(seed),
        hold_interval=hold, decimate=int(decimate), clamp_margin=float(clamp),
        phi_m=phi_m, bounds=bounds,
    )
    validate_config(cfg)
    return cfg


def validate_config(cfg: ScenarioConfig) -> None:
    """Cross-field checks shared by file loading and programmatic overrides."""
    suite = get_suite(cfg.plant)
    try:
        lemma1_pq(cfg.graph)
    except (GraphError, np.linalg.LinAlgError) as exc:
        raise ConfigError("graph", str(exc)) from None
    if cfg.initial_states.shape[1] != suite.node_dim:
        raise ConfigError("initial.states", f"plant {cfg.plant!r} has node dimension {suite.node_dim}")
    if suite.node_count is not None and cfg.n_agents != suite.node_count:
        raise ConfigError("graph.nodes", f"plant {cfg.plant!r} has exactly {suite.node_count} nodes")
    if not cfg.step > 0:
        raise ConfigError("scenario.step", "must be positive")
    if not cfg.horizon > cfg.step:
        raise ConfigError("scenario.horizon", f"must exceed the step {cfg.step}")
    if cfg.decimate < 1:
        raise ConfigError("scenario.decimate", "must be at least 1")
    if np.any(cfg.rho_inf <= 0):
        raise ConfigError("funnel.rho_inf", "must be positive")
    if np.any(cfg.ell <= 0):
        raise ConfigError("funnel.ell", "must be positive")
    if np.any(cfg.rho0 <= cfg.rho_inf):
        raise ConfigError("funnel.rho0", "must exceed rho_inf")
    if np.any(cfg.delta_under <= 0):
        raise ConfigError("transform.delta_under", "must be positive")
    if np.any(cfg.delta_bar <= cfg.delta_under):
        raise ConfigError("transform.delta_bar", "must exceed delta_under")
    if not cfg.xi > 0:
        raise ConfigError("transform.xi", "must be positive")
    if not 0 < cfg.clamp_margin < 1:
        raise ConfigError("transform.clamp_margin", "must lie in (0, 1)")
    if not (cfg.c > 0 and cfg.k > 0):
        raise ConfigError("gains.c" if not cfg.c > 0 else "gains.k", "must be positive")
    if np.any(cfg.pi <= 0):
        raise ConfigError("gains.pi", "must be positive")
    if cfg.neurons < 1:
        raise ConfigError("basis.neurons", "must be at least 1")
    if cfg.basis_kind is BasisKind.RBF and not cfg.width > 0:
        raise ConfigError("basis.width", "must be positive")
    lo, hi = cfg.center_range
    if not lo < hi:
        raise ConfigError("basis.range", "lo must be below hi")
    if not np.all(np.isfinite(cfg.initial_states)):
        raise ConfigError("initial.states", "must be finite")

    # the funnel must hold from t = 0
    x0 = np.broadcast_to(np.atleast_1d(leader_state(cfg.leader, 0.0)[0]), (cfg.node_dim,))
    e0 = pinned_laplacian(cfg.graph) @ (cfg.initial_states - x0[None, :])
    env = check_envelope(e0, rho(PerformanceFunction(cfg.rho0, cfg.rho_inf, cfg.ell), 0.0),
                         cfg.transform_config())
    bad = np.argwhere(~np.asarray(env.inside))
    if bad.size:
        i, ch = bad[0]
        raise ConfigError("initial.states",
                          f"initial error of node {i + 1} output {ch + 1} (e={e0[i, ch]:.6g}) "
                          f"lies outside the funnel at t=0")


def load_text(text: str, source: str = "<config>") -> ScenarioConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("<toml>", f"{source}: {exc}") from None
    return parse_config(doc, source)


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    if not path.exists():
        preset = preset_path(str(path))
        if preset is None:
            raise ConfigError("<file>", f"{path}: no such file or preset")
        path = preset
    return load_text(path.read_text(), str(path))


def preset_names() -> list[str]:
    root = resources.files("ppfsync") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def preset_path(name: str):
    root = resources.files("ppfsync") / "scenarios"
    stem = name[:-5] if name.endswith(".toml") else name
    cand = root / f"{stem}.toml"
    return Path(str(cand)) if cand.is_file() else None
