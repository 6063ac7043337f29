"""Bessel and Hankel functions of integer order for the cylinder kernels.

Two argument classes cover the radial wavevector q of the outside problem:
real positive arguments (propagating part of the spectrum) and purely
imaginary arguments (evanescent part).  Fully complex arguments occur only
in the logarithmic derivative J'_n(z)/(z J_n(z)) evaluated inside a lossy
cylinder, which is computed by a continued fraction so J_n itself is never
formed.

Every vector kernel returns exp-scaled values (mantissa, natural-log scale)
so that products like H_n(q r) H_n(q r') / H_n(q R)^2 can be combined with
their exponents cancelled analytically before anything is exponentiated.

Scaled chains are anchored on the order-0/1 cephes routines and extended by
the three-term recurrences in the stable direction (upward for Y and K,
ratio-based downward for J and I).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sp


class AccuracyLossError(ArithmeticError):
    """Raised when an evaluation cannot certify its tolerance."""


_LENTZ_TINY = 1e-290
_RENORM_LIMIT = 1e100


@dataclass(frozen=True)
class ScaledBesselPair:
    """A complex value factored as ``value * exp(log_scale)``.

    The stored mantissa is kept within [1e-2, 1e2] in magnitude; the rest of
    the dynamic range lives in ``log_scale``.
    """

    value: complex
    log_scale: float

    @classmethod
    def from_parts(cls, value: complex, log_scale: float = 0.0) -> "ScaledBesselPair":
        value = complex(value)
        mag = abs(value)
        if mag == 0.0:
            return cls(0.0j, -math.inf)
        if not (1e-2 <= mag <= 1e2):
            shift = math.log(mag)
            value = value / math.exp(shift) if math.isfinite(shift) else value
            log_scale += shift
        return cls(value, float(log_scale))

    def to_complex(self) -> complex:
        if self.log_scale == -math.inf:
            return 0.0j
        return self.value * math.exp(self.log_scale)

    def __mul__(self, other: "ScaledBesselPair") -> "ScaledBesselPair":
        return ScaledBesselPair.from_parts(self.value * other.value,
                                           self.log_scale + other.log_scale)

    def __truediv__(self, other: "ScaledBesselPair") -> "ScaledBesselPair":
        return ScaledBesselPair.from_parts(self.value / other.value,
                                           self.log_scale - other.log_scale)


# ---------------------------------------------------------------------------
# continued fractions (modified Lentz), vectorized over the argument array


def _ratio_cf(nu: int, z: np.ndarray, sign: float, tol: float = 1e-15,
              max_iter: int = 20000) -> np.ndarray:
    """Continued fraction for F_{nu+1}(z)/F_nu(z).

    ``sign=-1`` gives the J ratio, ``sign=+1`` the I ratio.  ``nu`` should be
    at least ~1.1 |z| for fast convergence.
    """
    z = np.asarray(z)
    f = np.full(z.shape, _LENTZ_TINY, dtype=complex)
    c = f.copy()
    d = np.zeros(z.shape, dtype=complex)
    done = np.zeros(z.shape, dtype=bool)
    for k in range(1, max_iter + 1):
        b = 2.0 * (nu + k) / z
        a = 1.0 if k == 1 else sign
        d = b + a * d
        d = np.where(d == 0, _LENTZ_TINY, d)
        c = b + a / c
        c = np.where(c == 0, _LENTZ_TINY, c)
        d = 1.0 / d
        delta = c * d
        f = np.where(done, f, f * delta)
        done |= np.abs(delta - 1.0) < tol
        if done.all() and k > 2:
            return f
    raise AccuracyLossError("Bessel ratio continued fraction did not converge")


def _cf_start_order(m_max: int, z: np.ndarray) -> int:
    zmax = float(np.max(np.abs(z))) if z.size else 0.0
    return max(m_max + 2, int(1.15 * zmax) + 16)


# ---------------------------------------------------------------------------
# scaled chains over orders 0..m_max for 1D argument arrays


def _chain_upward(m_max, x, f0, f1, log0, rec_sign):
    """Scaled upward recurrence F_{m+1} = (2m/x) F_m + rec_sign * F_{m-1}."""
    nb = x.shape[0]
    mant = np.empty((m_max + 1, nb), dtype=complex)
    logs = np.empty((m_max + 1, nb), dtype=float)
    mant[0], logs[0] = f0, log0
    if m_max >= 1:
        mant[1], logs[1] = f1, log0
    prev, cur = f0.astype(complex), f1.astype(complex)
    log_run = log0.copy()
    for m in range(1, m_max):
        nxt = (2.0 * m / x) * cur + rec_sign * prev
        big = np.abs(nxt) > _RENORM_LIMIT
        if big.any():
            scale = np.where(big, np.abs(nxt), 1.0)
            nxt = nxt / scale
            cur = cur / scale
            log_run = log_run + np.log(scale)
        prev, cur = cur, nxt
        mant[m + 1] = cur
        logs[m + 1] = log_run
    return mant, logs


def _chain_from_ratios(m_max, anchor_mant, anchor_log, ratios):
    """Scaled chain F_m = F_0 * prod(ratios[:m]) with per-order renorm."""
    nb = anchor_mant.shape[0]
    mant = np.empty((m_max + 1, nb), dtype=complex)
    logs = np.empty((m_max + 1, nb), dtype=float)
    cur = anchor_mant.astype(complex)
    log_run = np.asarray(anchor_log, dtype=float).copy()
    mant[0], logs[0] = cur, log_run
    for m in range(m_max):
        cur = cur * ratios[m]
        mag = np.abs(cur)
        need = (mag > 1e2) | ((mag < 1e-2) & (mag > 0.0))
        if need.any():
            scale = np.where(need, mag, 1.0)
            cur = cur / scale
            log_run = log_run + np.log(scale)
        mant[m + 1] = cur
        logs[m + 1] = log_run
    return mant, logs


def j_chain_real(m_max: int, x: np.ndarray):
    """Scaled J_m(x) for m = 0..m_max, x real positive 1D array."""
    x = np.asarray(x, dtype=float)
    start = _cf_start_order(m_max, x)
    rho_hi = _ratio_cf(start, x.astype(complex), -1.0)
    ratios = np.empty((m_max + 1, x.shape[0]), dtype=complex)
    rho = rho_hi
    for m in range(start - 1, -1, -1):
        rho = 1.0 / (2.0 * (m + 1) / x - rho)
        if m <= m_max:
            ratios[m] = rho  # J_{m+1}/J_m
    j0 = sp.j0(x)
    j1 = sp.j1(x)
    # anchor on whichever of J0, J1 is farther from a zero
    use_j1 = np.abs(j1) > np.abs(j0)
    safe_r0 = np.where(ratios[0] == 0, _LENTZ_TINY, ratios[0])
    anchor = np.where(use_j1, j1 / safe_r0, j0)
    return _chain_from_ratios(m_max, anchor.astype(complex),
                              np.zeros_like(x), ratios)


def y_chain_real(m_max: int, x: np.ndarray):
    """Scaled Y_m(x) for m = 0..m_max, x real positive."""
    x = np.asarray(x, dtype=float)
    y0 = sp.y0(x).astype(complex)
    y1 = sp.y1(x).astype(complex) if m_max >= 1 else y0
    return _chain_upward(m_max, x, y0, y1, np.zeros_like(x), -1.0)


def h1_chain_real(m_max: int, x: np.ndarray):
    """Scaled H^(1)_m(x) = J_m + i Y_m for m = 0..m_max, x real positive."""
    jm, jl = j_chain_real(m_max, x)
    ym, yl = y_chain_real(m_max, x)
    log = np.maximum(jl, yl)
    mant = jm * np.exp(jl - log) + 1j * ym * np.exp(yl - log)
    return mant, log


def i_chain(m_max: int, y: np.ndarray):
    """Scaled I_m(y) for m = 0..m_max, y real positive."""
    y = np.asarray(y, dtype=float)
    start = _cf_start_order(m_max, y)
    r_hi = _ratio_cf(start, y.astype(complex), +1.0)
    ratios = np.empty((m_max + 1, y.shape[0]), dtype=complex)
    r = r_hi
    for m in range(start - 1, -1, -1):
        r = 1.0 / (2.0 * (m + 1) / y + r)
        if m <= m_max:
            ratios[m] = r  # I_{m+1}/I_m
    anchor = sp.i0e(y).astype(complex)  # I_0 e^{-y}, never zero
    return _chain_from_ratios(m_max, anchor, y.copy(), ratios)


def k_chain(m_max: int, y: np.ndarray):
    """Scaled K_m(y) for m = 0..m_max, y real positive."""
    y = np.asarray(y, dtype=float)
    k0 = sp.k0e(y).astype(complex)
    k1 = sp.k1e(y).astype(complex) if m_max >= 1 else k0
    return _chain_upward(m_max, y, k0, k1, -y, +1.0)


_QUARTER_TURNS = np.array([1.0 + 0.0j, 1.0j, -1.0 + 0.0j, -1.0j])


def _i_pow(m):
    return _QUARTER_TURNS[np.asarray(m) % 4]


def j_chain_imag(m_max: int, y: np.ndarray):
    """Scaled J_m(i y) = i^m I_m(y) for m = 0..m_max, y real positive."""
    mant, logs = i_chain(m_max, y)
    phase = _i_pow(np.arange(m_max + 1))[:, None]
    return mant * phase, logs


def h1_chain_imag(m_max: int, y: np.ndarray):
    """Scaled H^(1)_m(i y) = (2/(i pi)) (-i)^m K_m(y) for m = 0..m_max."""
    mant, logs = k_chain(m_max, y)
    m = np.arange(m_max + 1)
    phase = (2.0 / (1j * np.pi)) * _i_pow(-m)[:, None]
    return mant * phase, logs


def logderiv_j_chain(m_max: int, z: np.ndarray):
    """J'_m(z)/(z J_m(z)) for m = 0..m_max, fully complex z, via ratios."""
    z = np.asarray(z, dtype=complex)
    start = _cf_start_order(m_max, z)
    rho = _ratio_cf(start, z, -1.0)
    out = np.empty((m_max + 1, z.shape[0]), dtype=complex)
    z2 = z * z
    for m in range(start - 1, -1, -1):
        rho = 1.0 / (2.0 * (m + 1) / z - rho)
        if m <= m_max:
            out[m] = m / z2 - rho / z
    return out


# ---------------------------------------------------------------------------
# public scalar interface

def _require_nonneg_order(n: int) -> int:
    if n != int(n) or n < 0:
        raise ValueError("order must be a non-negative integer")
    return int(n)


def _on_positive_imag_axis(z: complex) -> bool:
    return z.real == 0.0 and z.imag > 0.0


def bessel_j(n: int, z: complex) -> complex:
    """J_n(z) for integer n >= 0 and complex z (|Im z| <= ~700)."""
    n = _require_nonneg_order(n)
    z = complex(z)
    if z == 0:
        return 1.0 + 0.0j if n == 0 else 0.0j
    if abs(z.imag) > 705.0:
        raise AccuracyLossError("unscaled J_n overflows for |Im z| > 705; "
                                "use the scaled chain interface")
    if z.imag == 0.0:
        val = complex(sp.jv(n, z.real))
    elif _on_positive_imag_axis(z):
        val = complex(_i_pow(n) * sp.ive(n, z.imag) * math.exp(z.imag))
    else:
        val = complex(sp.jv(n, z))
    if not (math.isfinite(val.real) and math.isfinite(val.imag)):
        raise AccuracyLossError(f"J_{n}({z}) evaluation lost accuracy")
    return val


def hankel1(n: int, z: complex) -> complex:
    """H^(1)_n(z) for z real positive or purely imaginary with Im z > 0."""
    n = _require_nonneg_order(n)
    z = complex(z)
    if z == 0:
        raise ZeroDivisionError("H_n has a pole at z = 0")
    if z.imag == 0.0 and z.real > 0.0:
        val = complex(sp.hankel1(n, z.real))
    elif _on_positive_imag_axis(z):
        y = z.imag
        val = complex((2.0 / (1j * np.pi)) * _i_pow(-n) * sp.kve(n, y) * math.exp(-y))
    else:
        raise ValueError("hankel1 supports z real positive or purely "
                         "imaginary with Im z > 0")
    if not (math.isfinite(val.real) and math.isfinite(val.imag)):
        raise AccuracyLossError(f"H_{n}({z}) evaluation lost accuracy")
    return val


def bessel_j_deriv(n: int, z: complex) -> complex:
    """J'_n(z) from the recurrence J'_n = J_{n-1} - (n/z) J_n."""
    n = _require_nonneg_order(n)
    z = complex(z)
    if n == 0:
        return -bessel_j(1, z)
    if z == 0:
        return 0.5 + 0.0j if n == 1 else 0.0j
    return bessel_j(n - 1, z) - (n / z) * bessel_j(n, z)


def hankel1_deriv(n: int, z: complex) -> complex:
    """H'_n(z) from the recurrence H'_n = H_{n-1} - (n/z) H_n."""
    n = _require_nonneg_order(n)
    z = complex(z)
    if z == 0:
        raise ZeroDivisionError("H'_n has a pole at z = 0")
    if n == 0:
        return -hankel1(1, z)
    return hankel1(n - 1, z) - (n / z) * hankel1(n, z)


def logderiv_j(n: int, z: complex) -> complex:
    """J'_n(z)/(z J_n(z)), overflow-safe for fully complex z.

    Evaluated through the continued fraction for J_{n+1}/J_n, so J_n itself
    (which overflows for large |Im z|) is never formed.
    """
    n = _require_nonneg_order(n)
    z = complex(z)
    if z == 0:
        raise ZeroDivisionError("logderiv_j is singular at z = 0")
    out = logderiv_j_chain(n, np.array([z]))[n, 0]
    if not (math.isfinite(out.real) and math.isfinite(out.imag)):
        raise AccuracyLossError(
            f"logderiv_j({n}, {z}) hit a zero of J_{n} or lost accuracy")
    return complex(out)


def _scaled_single(kind: str, n: int, z: complex) -> ScaledBesselPair:
    z = complex(z)
    arr = np.array([z.real if z.imag == 0.0 else z.imag], dtype=float)
    if z.imag == 0.0 and z.real > 0.0:
        chain = j_chain_real(n, arr) if kind == "J" else h1_chain_real(n, arr)
    elif _on_positive_imag_axis(z):
        chain = j_chain_imag(n, arr) if kind == "J" else h1_chain_imag(n, arr)
    else:
        raise ValueError("scaled evaluations support z real positive or "
                         "purely imaginary with Im z > 0")
    mant, logs = chain
    return ScaledBesselPair.from_parts(complex(mant[n, 0]), float(logs[n, 0]))


def scaled_product(kind: str, n: int, a: complex, b: complex) -> ScaledBesselPair:
    """Exp-scaled H_n(a) H_n(b) (``kind="HH"``) or J_n(a)/H_n(b) (``"JH_ratio"``).

    The returned pair keeps the large exponents of the evanescent region
    (e.g. e^{+2 Im a}) in ``log_scale`` so callers can cancel them against
    other factors before exponentiating.
    """
    n = _require_nonneg_order(n)
    if kind == "HH":
        return _scaled_single("H", n, a) * _scaled_single("H", n, b)
    if kind == "JH_ratio":
        return _scaled_single("J", n, a) / _scaled_single("H", n, b)
    raise ValueError(f"unknown scaled product kind {kind!r}")
