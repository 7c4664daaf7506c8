"""Synchronization errors and the distributed neuro-adaptive control law."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import erf

from .approximator import (AdaptiveNetwork, BasisKind, BasisSpec, basis_eval, predict, weight_update_scalar,
                           weight_update_vector)
from .graph import Digraph, min_singular_value, pinned_laplacian
from .ppf import (EnvelopeStatus, PerformanceFunction, TransformConfig, check_envelope, r_coeff, rho,
                  transform)

_INV_2SQRTPI = 1.0 / (2.0 * math.sqrt(math.pi))


def local_error(i: int, x_i, neighbor_states: Sequence, b_i: float, x0):
    """e_i = sum_j a_ij (x_i - x_j) + b_i (x_i - x0) from neighbor data only.

    ``neighbor_states`` holds ``(j, x_j, a_ij)`` triples.
    """
    x_i = np.asarray(x_i, dtype=float)
    e = np.zeros_like(x_i)
    for _, x_j, a_ij in neighbor_states:
        x_j = np.asarray(x_j, dtype=float)
        if x_j.shape != x_i.shape:
            raise ValueError(f"neighbor state shape {x_j.shape} != own state shape {x_i.shape}")
        e = e + a_ij * (x_i - x_j)
    if b_i:
        x0 = np.asarray(x0, dtype=float)
        if x0.shape != x_i.shape:
            raise ValueError(f"leader state shape {x0.shape} != own state shape {x_i.shape}")
        e = e + b_i * (x_i - x0)
    return e


def global_error(x, x0, g: Digraph):
    """Kronecker form ((L+B) (x) I_n)(x - 1 (x) x0).

    ``x`` is (N,) for scalar agents or (N, n); the result has the same shape.
    """
    x = np.asarray(x, dtype=float)
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    n = x0.size
    if x.shape[0] != g.n or x.size != g.n * n:
        raise ValueError(f"state shape {x.shape} does not match {g.n} agents of dimension {n}")
    big = np.kron(pinned_laplacian(g), np.eye(n))
    e = big @ (x.reshape(-1) - np.tile(x0, g.n))
    return e.reshape(x.shape)


def control_law(eps, phi, net: AdaptiveNetwork, c: float):
    """u_i = -c eps_i - W_i^T phi_i."""
    eps = np.asarray(eps, dtype=float)
    ff = predict(net, phi)
    if np.shape(ff) != eps.shape and not (eps.shape == (1,) and np.ndim(ff) == 0):
        raise ValueError(f"eps shape {eps.shape} does not match network output {np.shape(ff)}")
    return -c * eps - ff


@dataclass(frozen=True)
class AgentRuntime:
    index: int
    funnel: PerformanceFunction          # per output channel, arrays of shape (n,)
    transform: TransformConfig
    net: AdaptiveNetwork                 # basis, gains and initial weights
    p: float
    d: float
    b: float
    c: float
    neighbors: tuple                     # ((j, a_ij), ...)

    def __post_init__(self):
        if not self.p > 0:
            raise ValueError("p_i must be positive")
        if self.d + self.b < 0:
            raise ValueError("d_i + b_i must be nonnegative")

    def gather(self, states) -> list:
        """Neighbor triples read from a full state snapshot."""
        return [(j, states[j], a) for j, a in self.neighbors]


@dataclass(frozen=True)
class AgentDiagnostics:
    e: np.ndarray
    eps: np.ndarray
    r: np.ndarray
    rho: np.ndarray
    clamped: np.ndarray
    envelope: EnvelopeStatus | None


def agent_step(rt: AgentRuntime, x_i, w_i, neighbor_states, x0, t: float, *, envelope: bool = True):
    """One evaluation of the local algorithm for agent ``rt.index``.

    Uses only the agent's own state and weights, its neighbors' states, the
    leader signal (read only if pinned) and its own gains.  Returns
    ``(u_i, dW_i/dt, diagnostics)``.
    """
    x_i = np.atleast_1d(np.asarray(x_i, dtype=float))
    e = local_error(rt.index, x_i, neighbor_states, rt.b, x0 if rt.b else None)
    rho_t = rho(rt.funnel, t)
    r = r_coeff(e, rho_t, rt.transform)
    eps, clamped = transform(e, rho_t, rt.transform)
    phi = basis_eval(rt.net.basis, x_i)
    net = rt.net.with_weights(w_i)
    eps_v = np.atleast_1d(eps)
    u = np.atleast_1d(control_law(eps_v if net.weights.ndim == 2 else eps_v[0], phi, net, rt.c))
    if net.weights.ndim == 1:
        w_dot = weight_update_scalar(net, phi, float(eps_v[0]), float(np.atleast_1d(r)[0]), rt.p, rt.d, rt.b)
    else:
        w_dot = weight_update_vector(net, phi, eps_v, r, rt.p, rt.d, rt.b)
    env = check_envelope(e, rho_t, rt.transform) if envelope else None
    diag = AgentDiagnostics(e=e, eps=eps_v, r=np.atleast_1d(r), rho=np.broadcast_to(rho_t, e.shape),
                            clamped=np.atleast_1d(clamped), envelope=env)
    return u, w_dot, diag


def build_runtimes(g: Digraph, p, funnels: Sequence[PerformanceFunction],
                   transforms: Sequence[TransformConfig], nets: Sequence[AdaptiveNetwork], c: float):
    d = g.in_degree
    return [AgentRuntime(index=i, funnel=funnels[i], transform=transforms[i], net=nets[i],
                         p=float(p[i]), d=float(d[i]), b=float(g.pinning[i]), c=float(c),
                         neighbors=tuple(g.neighbors(i)))
            for i in range(g.n)]


@dataclass(frozen=True)
class SyncError:
    local: np.ndarray
    transformed: np.ndarray
    r_coeffs: np.ndarray
    envelope: EnvelopeStatus
    e0: np.ndarray

    def sync_bound_holds(self, g: Digraph, tol: float = 1e-9) -> bool:
        """||x0 1 - x|| <= ||e|| / s_min(L+B)."""
        s = min_singular_value(pinned_laplacian(g))
        return bool(np.linalg.norm(self.e0) <= np.linalg.norm(self.local) / s + tol)


def sync_error(x, x0, g: Digraph, rho_vals, tc: TransformConfig) -> SyncError:
    """Global snapshot of errors, transformed errors and funnel status."""
    x = np.asarray(x, dtype=float)
    e = global_error(x, x0, g)
    eps, _ = transform(e, rho_vals, tc)
    return SyncError(local=e, transformed=np.asarray(eps), r_coeffs=np.asarray(r_coeff(e, rho_vals, tc)),
                     envelope=check_envelope(e, rho_vals, tc),
                     e0=(np.atleast_1d(x0) - x.reshape(g.n, -1)).reshape(x.shape))


@dataclass(frozen=True)
class AgentBank:
    """All agents' local laws stacked along a leading agent axis.

    Row i only combines agent i's own parameters with the states of its
    in-neighbors (nonzero entries of row i of the adjacency), so evaluating
    the bank is the same computation as calling :func:`agent_step` for every
    agent on one state snapshot.
    """
    adjacency: np.ndarray       # (N, N)
    pinning: np.ndarray         # (N,)
    rho0: np.ndarray            # (N, n)
    rho_inf: np.ndarray
    ell: np.ndarray
    delta_bar: np.ndarray
    delta_under: np.ndarray
    xi: float
    variant: str
    clamp_margin: float
    basis: BasisSpec
    gain_pi: np.ndarray         # (N,)
    leak_k: float
    p: np.ndarray               # (N,)
    c: float

    @property
    def drive_gain(self) -> np.ndarray:
        return self.gain_pi * self.p * (self.adjacency.sum(axis=1) + self.pinning)


def build_bank(runtimes: Sequence[AgentRuntime], N: int) -> AgentBank:
    """Stack per-agent runtimes; all agents must share one basis and leakage gain."""
    first = runtimes[0]
    for rt in runtimes[1:]:
        same = (rt.net.basis.kind is first.net.basis.kind
                and np.array_equal(rt.net.basis.centers, first.net.basis.centers)
                and np.array_equal(rt.net.basis.widths, first.net.basis.widths))
        if not same or rt.net.leak_k != first.net.leak_k or rt.c != first.c:
            raise ValueError("stacked evaluation needs a shared basis, k and c")
        if rt.transform.xi != first.transform.xi or rt.transform.variant is not first.transform.variant \
                or rt.transform.clamp_margin != first.transform.clamp_margin:
            raise ValueError("stacked evaluation needs a shared xi, variant and clamp margin")
    adj = np.zeros((N, N))
    for rt in runtimes:
        for j, a in rt.neighbors:
            adj[rt.index, j] = a

    def stack(get):
        return np.array([np.atleast_1d(np.asarray(get(rt), dtype=float)) for rt in runtimes])

    return AgentBank(
        adjacency=adj, pinning=np.array([rt.b for rt in runtimes]),
        rho0=stack(lambda rt: rt.funnel.rho0), rho_inf=stack(lambda rt: rt.funnel.rho_inf),
        ell=stack(lambda rt: rt.funnel.ell), delta_bar=stack(lambda rt: rt.transform.delta_bar),
        delta_under=stack(lambda rt: rt.transform.delta_under), xi=first.transform.xi,
        variant=first.transform.variant.value, clamp_margin=first.transform.clamp_margin,
        basis=first.net.basis, gain_pi=np.array([rt.net.gain_pi for rt in runtimes]),
        leak_k=first.net.leak_k, p=np.array([rt.p for rt in runtimes]), c=first.c)


def bank_step(bank: AgentBank, X: np.ndarray, W: np.ndarray, x0, t: float):
    """Controls and weight rates of every agent for states X (N, n), weights W (N, v, n).

    Returns ``(U, W_dot, E, eps, r, rho, clamped)``.
    """
    A = bank.adjacency
    dev = X - np.asarray(x0, dtype=float)
    E = A.sum(axis=1)[:, None] * X - A @ X + bank.pinning[:, None] * dev
    rho_t = (bank.rho0 - bank.rho_inf) * np.exp(-bank.ell * t) + bank.rho_inf
    db, du = bank.delta_bar, bank.delta_under
    ratio = np.abs(E) / rho_t
    cap = db * (1.0 - bank.clamp_margin)
    clamped = ratio > cap
    ratio = np.minimum(ratio, cap)
    log_ratio = np.log(np.maximum(du + ratio, np.finfo(float).tiny) / (db - ratio))
    if bank.variant == "sign":
        eps = 0.5 * np.sign(E) * log_ratio
    else:
        eps = _INV_2SQRTPI * erf(bank.xi * E / rho_t) * log_ratio
    r = (0.5 / rho_t) * (1.0 / (du + ratio) + 1.0 / (db - ratio))

    b = bank.basis
    if b.kind is BasisKind.RBF:
        d2 = ((X[:, None, :] - b.centers[None, :, :]) ** 2).sum(axis=2)
        phi = np.exp(-d2 / (2.0 * b.widths ** 2))
    else:
        phi = 0.5 * (1.0 + np.tanh(0.5 * (X @ b.centers.T + b.widths)))
    U = -bank.c * eps - np.einsum("ivk,iv->ik", W, phi)
    W_dot = (bank.drive_gain[:, None, None] * phi[:, :, None] * (eps * r)[:, None, :]
             - (bank.leak_k * bank.gain_pi)[:, None, None] * W)
    return U, W_dot, E, eps, r, rho_t, clamped
