"""Communication digraph, pinning, and the M-matrix quantities used by the
distributed controller.

Conventions: ``weights[i, j] > 0`` means node ``i`` receives the state of
node ``j``.  The pinning vector ``b`` holds the gains of the leader edges.
All indices are 0-based here; scenario files use 1-based indices.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.sparse.csgraph import connected_components


class GraphError(ValueError):
    """Invalid digraph or a violated precondition of the Lemma-1 quantities."""


@dataclass(frozen=True)
class Digraph:
    n: int
    weights: np.ndarray
    pinning: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        b = np.asarray(self.pinning, dtype=float)
        if self.n < 1:
            raise GraphError("a digraph needs at least one node")
        if w.shape != (self.n, self.n) or b.shape != (self.n,):
            raise GraphError(f"shape mismatch: weights {w.shape}, pinning {b.shape} for n={self.n}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise GraphError("weights and pinning gains must be finite")
        if np.any(np.diag(w) != 0.0):
            raise GraphError("self-connectivity a_ii must be zero")
        if np.any(w < 0) or np.any(b < 0):
            raise GraphError("adjacency weights and pinning gains must be nonnegative")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "pinning", b)

    @property
    def in_degree(self) -> np.ndarray:
        return self.weights.sum(axis=1)

    @property
    def pinning_matrix(self) -> np.ndarray:
        return np.diag(self.pinning)

    def neighbors(self, i: int) -> list[tuple[int, float]]:
        """(j, a_ij) for every node j that node i listens to."""
        row = self.weights[i]
        return [(int(j), float(row[j])) for j in np.flatnonzero(row)]


def from_edges(n: int, edges: Iterable, pinning: Iterable = ()) -> Digraph:
    """Build a digraph from ``(src, dst, weight)`` triples and ``(node, gain)`` pairs.

    An edge ``(j, i, w)`` means information flows from ``j`` to ``i``, so it
    sets ``a_ij = w``.
    """
    if n < 1:
        raise GraphError("a digraph needs at least one node")
    weights = np.zeros((n, n))
    for edge in edges:
        src, dst, w = edge
        src, dst, w = int(src), int(dst), float(w)
        for idx in (src, dst):
            if not 0 <= idx < n:
                raise GraphError(f"node index {idx} out of range [0, {n})")
        if src == dst:
            raise GraphError(f"self-edge on node {src} is not allowed")
        if not (w > 0 and math.isfinite(w)):
            raise GraphError(f"edge {src}->{dst} has nonpositive weight {w}")
        if weights[dst, src] != 0.0:
            raise GraphError(f"duplicate edge {src}->{dst}")
        weights[dst, src] = w
    b = np.zeros(n)
    for node, gain in pinning:
        node, gain = int(node), float(gain)
        if not 0 <= node < n:
            raise GraphError(f"pinned node {node} out of range [0, {n})")
        if not (gain >= 0 and math.isfinite(gain)):
            raise GraphError(f"pinning gain on node {node} must be nonnegative")
        b[node] = gain
    return Digraph(n, weights, b)


def laplacian(g: Digraph) -> np.ndarray:
    return np.diag(g.in_degree) - g.weights


def pinned_laplacian(g: Digraph) -> np.ndarray:
    """L + B."""
    return laplacian(g) + g.pinning_matrix


def is_strongly_connected(g: Digraph) -> bool:
    if g.n == 1:
        return True
    n_comp, _ = connected_components(g.weights > 0, directed=True, connection="strong")
    return n_comp == 1


def _check_finite(m) -> np.ndarray:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def min_singular_value(m) -> float:
    return float(np.linalg.svd(_check_finite(m), compute_uv=False)[-1])


def max_singular_value(m) -> float:
    return float(np.linalg.svd(_check_finite(m), compute_uv=False)[0])


@dataclass(frozen=True)
class LemmaOneData:
    q: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    min_eig_Q: float
    r: np.ndarray

    @property
    def p(self) -> np.ndarray:
        return np.diag(self.P).copy()

    @property
    def P1(self) -> np.ndarray:
        return self.P * self.r[None, :]


def _require_lemma1_preconditions(g: Digraph, strict: bool = True) -> None:
    if not np.any(g.pinning > 0):
        raise GraphError("no pinned node: at least one pinning gain b_i must be positive")
    if strict and not is_strongly_connected(g):
        raise GraphError("digraph is not strongly connected")


def lemma1_pq(g: Digraph, r=None, *, strict: bool = True) -> LemmaOneData:
    """q = (L+B)^-1 1, P = diag(1/q) and the symmetric Q = P1 (L+B) + (L+B)^T P1.

    ``r`` is an optional positive diagonal (given as a vector) with
    ``P1 = P diag(r)``; the default all-ones vector gives the plain Lemma-1 Q.
    ``strict=False`` drops the strong-connectivity requirement and only needs
    L+B to be a nonsingular M-matrix (every node reachable from a pinned one).

    Q is returned as computed.  On weighted digraphs it can be indefinite, so
    callers should read ``min_eig_Q`` rather than assume positivity; see
    :func:`m_matrix_certificate` for a construction that is always definite.
    """
    _require_lemma1_preconditions(g, strict)
    lb = pinned_laplacian(g)
    q = lu_solve(lu_factor(lb), np.ones(g.n))
    if not np.all(np.isfinite(q)):
        raise np.linalg.LinAlgError("L+B is numerically singular")
    if np.any(q <= 0):
        raise np.linalg.LinAlgError("(L+B)^-1 1 has a nonpositive entry; L+B is not a nonsingular M-matrix")
    r = np.ones(g.n) if r is None else np.asarray(r, dtype=float)
    if r.shape != (g.n,) or np.any(r <= 0):
        raise GraphError("r must be a positive vector of length n")
    P = np.diag(1.0 / q)
    P1 = P * r[None, :]
    Q = P1 @ lb + lb.T @ P1
    Q = 0.5 * (Q + Q.T)
    min_eig = float(np.linalg.eigvalsh(Q)[0])
    return LemmaOneData(q=q, P=P, Q=Q, min_eig_Q=min_eig, r=r)


def m_matrix_certificate(g: Digraph):
    """Diagonal P = diag(p_i / q_i) with q = (L+B)^-1 1 and p = (L+B)^-T 1.

    For a nonsingular M-matrix L+B this P makes P (L+B) + (L+B)^T P positive
    definite for every weighting.  Returns ``(P, Q, min_eig_Q)``.
    """
    _require_lemma1_preconditions(g, strict=False)
    lb = pinned_laplacian(g)
    lu = lu_factor(lb)
    q = lu_solve(lu, np.ones(g.n))
    p = lu_solve(lu, np.ones(g.n), trans=1)
    if np.any(q <= 0) or np.any(p <= 0):
        raise np.linalg.LinAlgError("L+B is not a nonsingular M-matrix")
    P = np.diag(p / q)
    Q = P @ lb + lb.T @ P
    Q = 0.5 * (Q + Q.T)
    return P, Q, float(np.linalg.eigvalsh(Q)[0])


@dataclass(frozen=True)
class BoundInputs:
    """Unknowable-in-practice constants entering the ultimate bounds.

    alpha_m: approximation error bound, w_m: disturbance bound, f_m: leader
    dynamics bound, w_ideal_m: ideal weight norm bound, delta_bar: largest
    upper shape constant, sigma_max_lambda: bound on the funnel-rate term.
    """
    alpha_m: float
    w_m: float
    f_m: float
    w_ideal_m: float
    delta_bar: float
    sigma_max_lambda: float

    def __post_init__(self):
        for name in ("alpha_m", "w_m", "f_m", "w_ideal_m", "delta_bar", "sigma_max_lambda"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"bound input {name} must be positive, got {v}")

    @property
    def b_m(self) -> float:
        return self.alpha_m + self.w_m + self.f_m


@dataclass(frozen=True)
class GainReport:
    c: float
    k: float
    phi_m: float
    sigma_min_Q: float
    min_eig_Q: float              # negative when diag(1/q) fails to certify L+B
    sigma_max_P: float
    sigma_max_P1: float
    sigma_max_A: float
    sigma_max_LB: float
    k_required: float
    # three readings of the c condition
    c_condition_stated: bool      # c s(Q) > phi_M s(P) s(A) / 2
    c_condition_h_matrix: bool    # H positive definite (uses s(P1) s(L+B))
    c_condition_squared: bool     # c s(Q) - phi_M s(P) s(A)^2 / 2 > 0
    sigma_min_H_closed_form: float
    h_matrix: np.ndarray
    min_eig_H: float
    h_vector: np.ndarray | None = None
    epsilon_bound: float | None = None
    weight_bound: float | None = None

    @property
    def k_ratio(self) -> float:
        """Supplied k relative to the gain-matching value c / (2 s(Q))."""
        return self.k / self.k_required

    def as_dict(self) -> dict:
        out = {}
        for key, val in self.__dict__.items():
            if isinstance(val, np.ndarray):
                val = val.tolist()
            elif isinstance(val, (np.bool_, np.floating)):
                val = val.item()
            out[key] = val
        out["k_ratio"] = self.k_ratio
        return out


def gain_check(g: Digraph, c: float, k: float, phi_m: float, r=None,
               bounds: BoundInputs | None = None, *, strict: bool = True) -> GainReport:
    if not (c > 0 and k > 0 and phi_m > 0):
        raise ValueError("c, k and phi_M must be positive")
    lemma = lemma1_pq(g, r, strict=strict)
    lb = pinned_laplacian(g)
    s_q = min_singular_value(lemma.Q)
    s_p = max_singular_value(lemma.P)
    s_p1 = max_singular_value(lemma.P1)
    s_a = max_singular_value(g.weights)
    s_lb = max_singular_value(lb)

    off = -0.5 * phi_m * s_p1 * s_lb
    H = np.array([[0.5 * c * s_q, off], [off, k]])
    min_eig_h = float(np.linalg.eigvalsh(H)[0])
    closed = 0.5 * (c * s_q - 0.5 * phi_m * s_p * s_a ** 2)

    h_vec = eps_bound = w_bound = None
    if bounds is not None:
        h_vec = np.array([s_p1 * s_lb * bounds.b_m + bounds.delta_bar * bounds.sigma_max_lambda,
                          k * bounds.w_ideal_m])
        if min_eig_h > 0:
            eps_bound = w_bound = float(h_vec.sum() / min_eig_h)
        else:
            eps_bound = w_bound = math.inf

    return GainReport(
        c=float(c), k=float(k), phi_m=float(phi_m),
        sigma_min_Q=s_q, min_eig_Q=lemma.min_eig_Q, sigma_max_P=s_p, sigma_max_P1=s_p1,
        sigma_max_A=s_a, sigma_max_LB=s_lb,
        k_required=c / (2.0 * s_q),
        c_condition_stated=bool(c * s_q > 0.5 * phi_m * s_p * s_a),
        c_condition_h_matrix=bool(min_eig_h > 0),
        c_condition_squared=bool(closed > 0),
        sigma_min_H_closed_form=float(closed),
        h_matrix=H, min_eig_H=min_eig_h,
        h_vector=h_vec, epsilon_bound=eps_bound, weight_bound=w_bound,
    )
