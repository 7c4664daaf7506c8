"""Agent and leader dynamics: x_i' = f_i(x_i, t) + u_i + w_i(t)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np


class LeaderKind(str, Enum):
    CONSTANT = "constant"
    SINUSOID = "sinusoid"
    CUSTOM = "custom"


@dataclass(frozen=True)
class LeaderSpec:
    kind: LeaderKind
    value: float | tuple = 0.0          # constant value
    amplitude: float | tuple = 0.0      # sinusoid amplitude
    frequency: float | tuple = 0.0      # sinusoid angular frequency (rad/s)
    func: Callable | None = None        # custom: t -> (x0, x0_dot)

    def __post_init__(self):
        object.__setattr__(self, "kind", LeaderKind(self.kind))
        if self.kind is LeaderKind.CUSTOM and self.func is None:
            raise ValueError("custom leader needs a callable")

    @property
    def dim(self) -> int:
        return int(np.size(leader_state(self, 0.0)[0]))

    @property
    def x0_initial(self):
        return leader_state(self, 0.0)[0]


def leader_state(spec: LeaderSpec, t: float):
    """(x0, x0_dot) at time t."""
    if spec.kind is LeaderKind.CONSTANT:
        x = np.asarray(spec.value, dtype=float)
        return x.copy(), np.zeros_like(x)
    if spec.kind is LeaderKind.SINUSOID:
        a = np.asarray(spec.amplitude, dtype=float)
        w = np.asarray(spec.frequency, dtype=float)
        return a * np.cos(w * t), -a * w * np.sin(w * t)
    x, xd = spec.func(t)
    return np.asarray(x, dtype=float), np.asarray(xd, dtype=float)


# ---------------------------------------------------------------------------
# Example 1: five scalar agents with polynomial drift and a random disturbance

_EX1_POWERS = (3, 2, 4, 1, 5)


def example1_dynamics(i: int, x: float, u: float, t: float, noise: float) -> float:
    """Node i (1-based): x' = x^p_i + u + a_i(t) cos(t) with a_i = noise."""
    if not 1 <= i <= 5:
        raise ValueError(f"example 1 has nodes 1..5, got {i}")
    return x ** _EX1_POWERS[i - 1] + u + noise * math.cos(t)


# ---------------------------------------------------------------------------
# Example 2: five 3-state MIMO agents

EX2_A = np.array([[-20.0, 22.0, 0.0], [0.0, 15.0, 0.0], [0.0, 0.0, -3.0]])
# rows = constant index 1..3, columns = node 1..5
EX2_a = np.array([[1.5, 0.5, 0.7, 1.3, 0.7],
                  [0.5, 1.4, 0.1, 1.3, 2.4],
                  [2.8, 1.4, 0.6, 0.7, 0.6]])
EX2_b = np.array([[0.5, 1.5, 1.1, 1.6, 0.3],
                  [0.7, 1.2, 1.3, 0.5, 0.3],
                  [1.1, 1.4, 1.6, 0.6, 1.0]])
EX2_c = np.array([[1.5, 2.5, 0.5, 1.7, 0.7],
                  [0.5, 1.7, 1.1, 0.3, 0.4],
                  [0.8, 0.4, 2.2, 0.9, 1.4]])


def example2_theta(j: int, t: float) -> np.ndarray:
    """Time-varying 3x3 parameter matrix of node j, columns theta^1..theta^3."""
    c1, c2, c3 = EX2_c[:, j - 1]
    s, co = math.sin, math.cos
    return np.array([
        [3 * c1 * s(0.5 * t), 2 * c1 * s(0.4 * c1 * t) * co(0.3 * t), 0.7 * s(0.2 * c1 * t)],
        [0.9 * s(0.2 * c2 * t), 2.5 * s(0.3 * c2 * t) + 0.3 * co(t), 1.0 * s(0.1 * c2 * t)],
        [0.5 * s(0.13 * c3 * t), 0.6 * c3 * co(0.15 * t), 1.5 * co(0.7 * c3 * t) + 1.6 * c3 * s(0.3 * t)],
    ])


def example2_disturbance(j: int, t: float) -> np.ndarray:
    b1, b2, b3 = EX2_b[:, j - 1]
    return np.array([1 + b1 * math.sin(b1 * t),
                     1.2 * math.cos(b2 * t),
                     math.sin(0.5 * b3 * t) + math.cos(b3 * t) - 1])


def example2_nonlinearity(j: int, x, t: float) -> np.ndarray:
    a1, a2, a3 = EX2_a[:, j - 1]
    x1, x2, x3 = x
    return np.array([a1 * x3 * x1 + 0.2 * math.sin(x1 * a1),
                     -a2 * x1 * x3 - 0.2 * a2 * math.cos(a2 * x3 * t) * x1,
                     a3 * x1 * x2])


def example2_dynamics(j: int, x, u, t: float, *, with_theta: bool = True,
                      with_disturbance: bool = True) -> np.ndarray:
    """Node j (1-based): x' = A x + u + theta_j(t) x + f_j(x) + D_j(t)."""
    if not 1 <= j <= 5:
        raise ValueError(f"example 2 has nodes 1..5, got {j}")
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.shape != (3,) or u.shape != (3,):
        raise ValueError("example 2 states and inputs are 3-vectors")
    dx = EX2_A @ x + u + example2_nonlinearity(j, x, t)
    if with_theta:
        dx = dx + example2_theta(j, t) @ x
    if with_disturbance:
        dx = dx + example2_disturbance(j, t)
    return dx


def example2_all_nodes(X, U, t: float) -> np.ndarray:
    """All five nodes of example 2 at once; X and U are (5, 3)."""
    X = np.asarray(X, dtype=float)
    x1, x2, x3 = X.T
    a1, a2, a3 = EX2_a
    b1, b2, b3 = EX2_b
    c1, c2, c3 = EX2_c
    s, co = np.sin, np.cos
    # theta[j] as a (5, 3, 3) stack, rows = output, columns = theta^1..theta^3
    theta = np.empty((5, 3, 3))
    theta[:, 0, 0] = 3 * c1 * s(0.5 * t)
    theta[:, 0, 1] = 2 * c1 * s(0.4 * c1 * t) * co(0.3 * t)
    theta[:, 0, 2] = 0.7 * s(0.2 * c1 * t)
    theta[:, 1, 0] = 0.9 * s(0.2 * c2 * t)
    theta[:, 1, 1] = 2.5 * s(0.3 * c2 * t) + 0.3 * co(t)
    theta[:, 1, 2] = 1.0 * s(0.1 * c2 * t)
    theta[:, 2, 0] = 0.5 * s(0.13 * c3 * t)
    theta[:, 2, 1] = 0.6 * c3 * co(0.15 * t)
    theta[:, 2, 2] = 1.5 * co(0.7 * c3 * t) + 1.6 * c3 * s(0.3 * t)
    f = np.stack([a1 * x3 * x1 + 0.2 * s(x1 * a1),
                  -a2 * x1 * x3 - 0.2 * a2 * co(a2 * x3 * t) * x1,
                  a3 * x1 * x2], axis=1)
    D = np.stack([1 + b1 * s(b1 * t), 1.2 * co(b2 * t), s(0.5 * b3 * t) + co(b3 * t) - 1], axis=1)
    return X @ EX2_A.T + U + np.einsum("jkl,jl->jk", theta, X) + f + D


# ---------------------------------------------------------------------------
# Disturbance sampling

@dataclass
class DisturbanceSampler:
    """Uniform [0, 1] amplitudes per node, held for ``hold_interval`` seconds."""
    rng: np.random.Generator
    node_count: int
    hold_interval: float
    _block: int = field(default=-1, init=False)
    _current: np.ndarray | None = field(default=None, init=False)

    def __post_init__(self):
        if not self.hold_interval > 0:
            raise ValueError("hold interval must be positive")

    def at(self, t: float) -> np.ndarray:
        block = int(math.floor(t / self.hold_interval + 1e-9))
        while self._block < block:
            self._current = self.rng.uniform(0.0, 1.0, self.node_count)
            self._block += 1
        return self._current


def sample_disturbance(rng: np.random.Generator, node_count: int, hold_interval: float) -> DisturbanceSampler:
    return DisturbanceSampler(rng, node_count, hold_interval)


# ---------------------------------------------------------------------------
# Suites

@dataclass(frozen=True)
class PlantSuite:
    """A family of node dynamics.

    ``dynamics(i, x, u, t, noise)`` takes the 0-based node index and returns
    x_i'.  ``noise`` is the node's held disturbance amplitude (0 when the
    suite is not ``noisy``).  ``node_count`` is None for suites that accept
    any number of nodes.
    """
    name: str
    node_dim: int
    dynamics: Callable
    node_count: int | None = None
    noisy: bool = False
    default_leader: LeaderSpec | None = None
    disturbance_bound: float | None = None
    batch: Callable | None = None       # optional (X, U, t, noise) -> X' over all nodes at once

    def all_nodes(self, X, U, t: float, noise) -> np.ndarray:
        if self.batch is not None:
            return self.batch(X, U, t, noise)
        return np.array([self.dynamics(i, X[i], U[i], t, noise[i]) for i in range(len(X))])


def _ex1(i, x, u, t, noise):
    return np.array([example1_dynamics(i + 1, float(x[0]), float(u[0]), t, float(noise))])


def _ex2(i, x, u, t, noise):
    return example2_dynamics(i + 1, x, u, t)


def _linear(i, x, u, t, noise):
    return x + u + noise * math.cos(t)


_EX1_POW_COL = np.array(_EX1_POWERS, dtype=float)[:, None]


def _ex1_batch(X, U, t, noise):
    return X ** _EX1_POW_COL + U + (np.asarray(noise) * math.cos(t))[:, None]


def _linear_batch(X, U, t, noise):
    return X + U + (np.asarray(noise) * math.cos(t))[:, None]


def _ex2_batch(X, U, t, noise):
    return example2_all_nodes(X, U, t)


SUITES: dict[str, PlantSuite] = {
    "example1": PlantSuite("example1", 1, _ex1, node_count=5, noisy=True,
                           default_leader=LeaderSpec(LeaderKind.SINUSOID, amplitude=2.0, frequency=0.8),
                           disturbance_bound=1.0, batch=_ex1_batch),
    "example2": PlantSuite("example2", 3, _ex2, node_count=5,
                           default_leader=LeaderSpec(LeaderKind.CONSTANT, value=(1.5, 2.7, 3.5)),
                           batch=_ex2_batch),
    # unstable linear scalar agents with the example-1 disturbance; a benign reference plant
    "linear": PlantSuite("linear", 1, _linear, noisy=True,
                         default_leader=LeaderSpec(LeaderKind.SINUSOID, amplitude=2.0, frequency=0.8),
                         disturbance_bound=1.0, batch=_linear_batch),
}


def register_suite(suite: PlantSuite, *, replace_existing: bool = False) -> None:
    if suite.name in SUITES and not replace_existing:
        raise ValueError(f"plant suite {suite.name!r} already registered")
    SUITES[suite.name] = suite


def get_suite(name: str) -> PlantSuite:
    try:
        return SUITES[name]
    except KeyError:
        raise KeyError(f"unknown plant suite {name!r}; known: {sorted(SUITES)}") from None
