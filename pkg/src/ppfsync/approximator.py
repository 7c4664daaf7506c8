"""Per-agent linear-in-the-weights neural approximator and its tuning laws."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np


class BasisKind(str, Enum):
    RBF = "rbf"
    SIGMOID = "sigmoid"


@dataclass(frozen=True)
class BasisSpec:
    """Basis definition.

    For RBF, ``centers`` are the v points c_m and ``widths`` the sigma_m.  For
    the sigmoid basis, ``centers`` are the slope vectors and ``widths`` the
    biases, so phi_m = logistic(c_m . x + sigma_m).
    """
    kind: BasisKind
    centers: np.ndarray  # (v, input_dim)
    widths: np.ndarray   # (v,)

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.centers, dtype=float))
        w = np.broadcast_to(np.asarray(self.widths, dtype=float), (c.shape[0],)).copy()
        kind = BasisKind(self.kind)
        if not np.all(np.isfinite(c)):
            raise ValueError("basis centers must be finite")
        if kind is BasisKind.RBF and np.any(w <= 0):
            raise ValueError("RBF widths must be positive")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "widths", w)

    @property
    def neuron_count(self) -> int:
        return self.centers.shape[0]

    @property
    def input_dim(self) -> int:
        return self.centers.shape[1]

    @property
    def phi_bound(self) -> float:
        """Every entry lies in (0, 1], so ||phi|| <= sqrt(v)."""
        return float(np.sqrt(self.neuron_count))


def grid_rbf(neurons: int, lo: float, hi: float, width: float, input_dim: int = 1) -> BasisSpec:
    """RBF centers evenly spaced on the diagonal of [lo, hi]^input_dim."""
    line = np.linspace(lo, hi, neurons) if neurons > 1 else np.array([0.5 * (lo + hi)])
    centers = np.repeat(line[:, None], input_dim, axis=1)
    return BasisSpec(BasisKind.RBF, centers, np.full(neurons, float(width)))


def basis_eval(b: BasisSpec, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (b.input_dim,):
        raise ValueError(f"state has shape {x.shape}, basis expects ({b.input_dim},)")
    if b.kind is BasisKind.RBF:
        d2 = ((b.centers - x) ** 2).sum(axis=1)
        return np.exp(-d2 / (2.0 * b.widths ** 2))
    z = b.centers @ x + b.widths
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass(frozen=True)
class AdaptiveNetwork:
    basis: BasisSpec
    weights: np.ndarray  # (v,) scalar agents, (v, n) vector agents
    gain_pi: float
    leak_k: float
    _checked: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        if self._checked:
            return
        if not self.gain_pi > 0 or not self.leak_k > 0:
            raise ValueError("gain Pi and leakage k must be positive")
        w = np.asarray(self.weights, dtype=float)
        if w.shape[0] != self.basis.neuron_count:
            raise ValueError(f"weights have {w.shape[0]} rows, basis has {self.basis.neuron_count} neurons")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        object.__setattr__(self, "weights", w)

    @classmethod
    def zeros(cls, basis: BasisSpec, outputs: int, gain_pi: float, leak_k: float) -> "AdaptiveNetwork":
        shape = (basis.neuron_count,) if outputs == 1 else (basis.neuron_count, outputs)
        return cls(basis, np.zeros(shape), gain_pi, leak_k)

    def with_weights(self, weights) -> "AdaptiveNetwork":
        # hot path inside the integrator; shape was validated at construction
        return replace(self, weights=weights, _checked=True)


def predict(net: AdaptiveNetwork, phi):
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (net.weights.shape[0],):
        raise ValueError(f"phi has shape {phi.shape}, expected ({net.weights.shape[0]},)")
    out = net.weights.T @ phi
    return float(out) if np.ndim(out) == 0 else out


def _require_finite(*vals):
    for v in vals:
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite input to the weight update")


def weight_update_scalar(net: AdaptiveNetwork, phi, eps, r, p, d, b) -> np.ndarray:
    """dW/dt = Pi phi eps r p (d + b) - k Pi W for a scalar agent."""
    phi = np.asarray(phi, dtype=float)
    _require_finite(phi, eps, r, p, d, b)
    if phi.shape != net.weights.shape:
        raise ValueError(f"phi has shape {phi.shape}, weights {net.weights.shape}")
    pi = net.gain_pi
    return pi * phi * (eps * r * p * (d + b)) - net.leak_k * pi * net.weights


def weight_update_vector(net: AdaptiveNetwork, phi, eps, r, p, d, b) -> np.ndarray:
    """Per-output-channel version: dW/dt = Pi phi (eps * r)^T p (d + b) - k Pi W.

    ``r`` may be a scalar or one value per output channel.  The drive term
    keeps the scalar law's sign so that a single output reduces exactly to
    :func:`weight_update_scalar`.
    """
    phi = np.asarray(phi, dtype=float)
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    _require_finite(phi, eps, r, p, d, b)
    w = net.weights.reshape(net.weights.shape[0], -1)
    if phi.shape != (w.shape[0],) or eps.shape != (w.shape[1],):
        raise ValueError(f"phi {phi.shape} / eps {eps.shape} do not match weights {w.shape}")
    pi = net.gain_pi
    drive = np.outer(phi, eps * np.asarray(r, dtype=float)) * (p * (d + b))
    return (pi * drive - net.leak_k * pi * w).reshape(net.weights.shape)
