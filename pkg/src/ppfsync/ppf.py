"""Prescribed performance funnels and the error transformation.

All functions broadcast over numpy arrays, so per-channel parameters can be
given as arrays shaped like the error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import erf

_INV_2SQRTPI = 1.0 / (2.0 * math.sqrt(math.pi))
_S_SATURATION = 350.0


@dataclass(frozen=True)
class PerformanceFunction:
    rho0: float | np.ndarray
    rho_inf: float | np.ndarray
    ell: float | np.ndarray

    def __post_init__(self):
        r0, ri, ell = (np.asarray(v, dtype=float) for v in (self.rho0, self.rho_inf, self.ell))
        if np.any(ri <= 0) or np.any(ell <= 0):
            raise ValueError("rho_inf and ell must be positive")
        if np.any(r0 < ri):
            raise ValueError("rho0 must be at least rho_inf")


class Variant(str, Enum):
    SIGN = "sign"
    ERF = "erf"


@dataclass(frozen=True)
class TransformConfig:
    delta_bar: float | np.ndarray
    delta_under: float | np.ndarray
    xi: float = 20.0
    variant: Variant = Variant.ERF
    clamp_margin: float = 1e-6

    def __post_init__(self):
        db, du = np.asarray(self.delta_bar, dtype=float), np.asarray(self.delta_under, dtype=float)
        if np.any(du <= 0):
            raise ValueError("delta_under must be positive")
        if np.any(db <= du):
            raise ValueError("delta_bar must exceed delta_under")
        if not self.xi > 0:
            raise ValueError("xi must be positive")
        if not 0 < self.clamp_margin < 1:
            raise ValueError("clamp_margin must lie in (0, 1)")
        object.__setattr__(self, "variant", Variant(self.variant))

    @property
    def erf_width(self) -> float:
        """Ratio above which erf(xi e / rho) is effectively +-1."""
        return 2.0 / self.xi


@dataclass(frozen=True)
class EnvelopeStatus:
    inside: bool | np.ndarray
    ratio: float | np.ndarray
    clamped: bool | np.ndarray
    margin: float | np.ndarray


def rho(pf: PerformanceFunction, t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("rho is defined for t >= 0")
    return (pf.rho0 - pf.rho_inf) * np.exp(-pf.ell * t) + pf.rho_inf


def rho_dot(pf: PerformanceFunction, t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("rho is defined for t >= 0")
    return -pf.ell * (pf.rho0 - pf.rho_inf) * np.exp(-pf.ell * t)


def check_envelope(e, rho_val, tc: TransformConfig) -> EnvelopeStatus:
    """Sign-switched funnel test.

    e > 0 must satisfy -du*rho < e < db*rho and e < 0 must satisfy
    -db*rho < e < du*rho; e = 0 is always inside.  ``margin`` is the signed
    distance to the nearest active bound (negative outside).
    """
    e = np.asarray(e, dtype=float)
    rho_val = np.asarray(rho_val, dtype=float)
    if np.any(rho_val <= 0):
        raise ValueError("rho must be positive")
    upper = np.where(e >= 0, tc.delta_bar, tc.delta_under) * rho_val
    lower = -np.where(e >= 0, tc.delta_under, tc.delta_bar) * rho_val
    inside = (e > lower) & (e < upper)
    margin = np.minimum(e - lower, upper - e)
    ratio = e / rho_val
    clamped = np.abs(ratio) > tc.delta_bar * (1.0 - tc.clamp_margin)
    return EnvelopeStatus(inside=_unwrap(inside), ratio=_unwrap(ratio),
                          clamped=_unwrap(clamped), margin=_unwrap(margin))


def smooth_S(eps, tc: TransformConfig, negative=False):
    """The smooth bounded map from transformed error back to e/rho.

    ``negative`` selects the branch used for e < 0, where the two shape
    constants trade places; it may be a boolean array.
    """
    eps = np.asarray(eps, dtype=float)
    hi = np.where(negative, tc.delta_under, tc.delta_bar)
    lo = np.where(negative, tc.delta_bar, tc.delta_under)
    # (hi e^x - lo e^-x) / (e^x + e^-x) written with tanh to avoid overflow
    out = 0.5 * (hi - lo) + 0.5 * (hi + lo) * np.tanh(eps)
    out = np.where(eps > _S_SATURATION, hi, out)
    out = np.where(eps < -_S_SATURATION, -lo, out)
    return _unwrap(out)


def _clamped_log_ratio(e, rho_val, tc: TransformConfig):
    rho_val = np.asarray(rho_val, dtype=float)
    if np.any(rho_val <= 0):
        raise ValueError("rho must be positive")
    u = np.abs(np.asarray(e, dtype=float)) / rho_val
    cap = tc.delta_bar * (1.0 - tc.clamp_margin)
    clamped = u > cap
    u = np.minimum(u, cap)
    num = np.maximum(tc.delta_under + u, np.finfo(float).tiny)
    return np.log(num / (tc.delta_bar - u)), u, clamped


def transform_sign(e, rho_val, tc: TransformConfig):
    """Returns (eps, clamped) for the sign-switched logarithmic transform."""
    log_ratio, _, clamped = _clamped_log_ratio(e, rho_val, tc)
    eps = 0.5 * np.sign(e) * log_ratio
    return _unwrap(eps), _unwrap(clamped)


def transform_erf(e, rho_val, tc: TransformConfig):
    """Returns (eps, clamped) with sign() replaced by erf(xi e / rho)."""
    log_ratio, _, clamped = _clamped_log_ratio(e, rho_val, tc)
    eps = _INV_2SQRTPI * erf(tc.xi * np.asarray(e, dtype=float) / rho_val) * log_ratio
    return _unwrap(eps), _unwrap(clamped)


def transform(e, rho_val, tc: TransformConfig):
    if tc.variant is Variant.SIGN:
        return transform_sign(e, rho_val, tc)
    return transform_erf(e, rho_val, tc)


def r_coeff(e, rho_val, tc: TransformConfig):
    _, u, _ = _clamped_log_ratio(e, rho_val, tc)
    rho_val = np.asarray(rho_val, dtype=float)
    r = (0.5 / rho_val) * (1.0 / (tc.delta_under + u) + 1.0 / (tc.delta_bar - u))
    return _unwrap(r)


def erf_saturated(e, rho_val, tc: TransformConfig):
    """True where |e|/rho >= 2/xi.

    This is the regime in which epsilon_dot is an accurate description of the
    erf transform; below it the erf factor still varies and the analytic rate
    only describes the sign transform.
    """
    return _unwrap(np.abs(np.asarray(e, dtype=float)) / np.asarray(rho_val, dtype=float) >= tc.erf_width)


def epsilon_dot(e, e_dot, pf: PerformanceFunction, t, tc: TransformConfig):
    """Analytic rate of the transformed error, r (e_dot - e rho_dot / rho)."""
    rv = rho(pf, t)
    return _unwrap(r_coeff(e, rv, tc) * (np.asarray(e_dot, dtype=float) - np.asarray(e) * rho_dot(pf, t) / rv))


def _unwrap(a):
    a = np.asarray(a)
    return a.item() if a.ndim == 0 else a
