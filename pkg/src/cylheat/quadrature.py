"""Adaptive panel integration for the kz and omega integrals.

The workhorse is a vector-valued Filon-Legendre scheme: on each panel the
(possibly complex) envelope is sampled at 16 Gauss-Legendre nodes, projected
on Legendre polynomials, and integrated against cos(w x) / sin(w x) with the
analytic moments  int_-1^1 P_l(t) e^{i th t} dt = 2 i^l j_l(th).  Panel
widths are therefore limited by envelope smoothness, not by the oscillation
period, which keeps far-field separations cheap.

Panels are processed in deterministic waves; every wave evaluates all
pending panels in a single batched call of the envelope, which is where the
vectorized Bessel chains pay off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.polynomial import legendre
from scipy import special as sp

from .constants import HBAR, KB


class QuadratureConvergenceError(RuntimeError):
    """Panel or panel-budget exhaustion; carries the partial result."""

    def __init__(self, message, partial=None, est_error=None):
        super().__init__(message)
        self.partial = partial
        self.est_error = est_error


@dataclass(frozen=True)
class QuadratureSpec:
    """All tolerances and convergence-control knobs in one place."""

    rel_tol: float = 1e-6
    abs_tol_floor: float = 1e-12
    evanescent_lambda: float = 40.0
    max_panels: int = 20000
    n_max_cap: int = 120
    consecutive_small: int = 3
    omega_range_factor: tuple = (0.01, 50.0)
    resonance_refine: bool = True

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol_floor <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_panels < 1 or self.n_max_cap < 1 or self.consecutive_small < 1:
            raise ValueError("caps must be >= 1")

    def key(self) -> tuple:
        return (self.rel_tol, self.abs_tol_floor, self.evanescent_lambda,
                self.max_panels, self.n_max_cap, self.consecutive_small,
                tuple(self.omega_range_factor), self.resonance_refine)


@dataclass
class SpectralCurve:
    """An ordered (omega, value) tabulation with provenance metadata."""

    omega: np.ndarray
    value: np.ndarray
    quantity: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float)
        self.value = np.asarray(self.value)
        if np.any(np.diff(self.omega) <= 0):
            raise ValueError("omega grid must be strictly increasing")


_NODES_PER_PANEL = 16
_GL_T, _GL_W = np.polynomial.legendre.leggauss(_NODES_PER_PANEL)
# projection matrix: c_l = sum_i proj[l, i] f(x_i), exact through degree 31-l
_PROJ = np.empty((_NODES_PER_PANEL, _NODES_PER_PANEL))
for _l in range(_NODES_PER_PANEL):
    _c = np.zeros(_l + 1)
    _c[_l] = 1.0
    _PROJ[_l] = (2 * _l + 1) / 2.0 * _GL_W * legendre.legval(_GL_T, _c)
_LVALS = np.arange(_NODES_PER_PANEL)
_IPOW = 1j ** _LVALS


def _panel_moments(theta):
    """M_l(+-theta) = 2 (+-i)^l j_l(theta) for l = 0..15, theta >= 0 array."""
    jl = sp.spherical_jn(_LVALS[:, None], theta[None, :])
    m_plus = 2.0 * _IPOW[:, None] * jl
    m_minus = m_plus.conj()
    return m_plus, m_minus


def integrate_panels(env, breaks, *, freq=0.0, parity, rel_tol, abs_floor,
                     max_panels, min_width_frac=3e-15, abs_cap=0.0):
    """Adaptive vector Filon-Legendre integration over fixed breakpoints.

    Parameters
    ----------
    env : callable
        ``env(x)`` with 1D ``x`` returning shape ``(n_comp, x.size)``.
        The oscillatory weight cos/sin(freq*x) is *not* included in env.
    breaks : array
        Initial panel edges, strictly increasing.
    freq : float
        Oscillation wavenumber of the weight.
    parity : sequence of str
        Per component: ``"cos"`` or ``"sin"``.
    rel_tol, abs_floor, max_panels :
        Convergence controls; the error target per component c is
        ``rel_tol * |I_c| + abs_floor_scale`` where the floor is relative to
        the largest component magnitude.

    Returns
    -------
    totals : (n_comp,) complex
    errors : (n_comp,) float
    n_panels : int
    """
    breaks = np.asarray(breaks, dtype=float)
    if breaks.ndim != 1 or breaks.size < 2 or np.any(np.diff(breaks) <= 0):
        raise ValueError("breaks must be strictly increasing with >= 2 edges")
    parity = list(parity)
    is_sin = np.array([p == "sin" for p in parity])
    span = breaks[-1] - breaks[0]
    min_width = span * min_width_frac

    panels = [(breaks[i], breaks[i + 1]) for i in range(breaks.size - 1)]
    vals: dict = {}
    errs: dict = {}
    fmag: dict = {}

    def _do_panels(plist):
        mids = np.array([(a + b) / 2.0 for a, b in plist])
        hws = np.array([(b - a) / 2.0 for a, b in plist])
        xs = (mids[:, None] + hws[:, None] * _GL_T[None, :]).ravel()
        f = np.asarray(env(xs))
        f = f.reshape(f.shape[0], len(plist), _NODES_PER_PANEL)
        coef = np.einsum("cpi,li->cpl", f, _PROJ)
        theta = np.abs(freq) * hws
        m_plus, m_minus = _panel_moments(theta)
        if freq < 0:
            m_plus, m_minus = m_minus, m_plus
        phase = np.exp(1j * freq * mids)
        i_plus = hws * phase * np.einsum("cpl,lp->cp", coef, m_plus)
        i_minus = hws * phase.conj() * np.einsum("cpl,lp->cp", coef, m_minus)
        val_cos = 0.5 * (i_plus + i_minus)
        val_sin = (i_plus - i_minus) / 2j
        val = np.where(is_sin[:, None], val_sin, val_cos)
        # truncation-error proxy: the Legendre tail, weighted by the largest
        # surviving oscillatory moment, floored for the zero-frequency rule
        tail_mass = 3.0 * np.sum(np.abs(coef[:, :, 12:]), axis=2)
        wosc = 2.0 * np.max(np.abs(m_plus[12:]), axis=0)
        err = hws * (wosc + 0.05) * tail_mass
        mag = 2.0 * hws * np.max(np.abs(f), axis=2)
        for j, p in enumerate(plist):
            vals[p] = val[:, j]
            errs[p] = err[:, j]
            fmag[p] = mag[:, j]

    _do_panels(panels)
    while True:
        totals = np.sum([vals[p] for p in panels], axis=0)
        err_tot = np.sum([errs[p] for p in panels], axis=0)
        scale = max(np.max(np.abs(totals)), 1e-300)
        # quadrature cannot resolve below roundoff of the envelope mass
        noise = 5e-16 * np.sum([fmag[p] for p in panels], axis=0)
        tol = (rel_tol * np.maximum(np.abs(totals), 0.0)
               + np.maximum(max(abs_floor * scale, abs_cap), noise))
        bad = err_tot > tol
        if not bad.any():
            return totals, err_tot, len(panels)
        # split every panel whose worst component error exceeds its share
        ratios = {p: np.max(errs[p][bad] / tol[bad]) for p in panels}
        threshold = 0.5 / max(len(panels), 1)
        to_split = [p for p in panels if ratios[p] > threshold
                    and (p[1] - p[0]) > min_width]
        if not to_split:
            raise QuadratureConvergenceError(
                "panel refinement stalled at minimum width",
                partial=totals, est_error=err_tot)
        if len(panels) + len(to_split) > max_panels:
            raise QuadratureConvergenceError(
                f"panel budget {max_panels} exhausted",
                partial=totals, est_error=err_tot)
        new = []
        for p in to_split:
            a, b = p
            mid = 0.5 * (a + b)
            panels.remove(p)
            del vals[p], errs[p]
            new.extend([(a, mid), (mid, b)])
        panels.extend(new)
        panels.sort()
        _do_panels(new)


def _as_vector_env(f):
    def env(x):
        try:
            out = np.asarray(f(x), dtype=complex)
            if out.shape == x.shape:
                return out[None, :]
        except (TypeError, ValueError):
            pass
        return np.array([[complex(f(float(v))) for v in x]])
    return env


def integrate_kz(f, k, spec: QuadratureSpec, osc_period_hint=None,
                 kz_max=None):
    """Integrate f over (0, infinity) with a branch split at kz = k.

    The integrand is treated as a black box (any oscillation stays inside
    ``f``); when ``osc_period_hint`` is given, initial panel widths are
    capped at a quarter period so every oscillation is resolved.  The upper
    cutoff defaults to an adaptive geometric extension: segments
    [4k, 8k], [8k, 16k], ... are appended until one contributes less than
    the tolerance.

    Returns ``(integral, est_error)``.
    """
    if k <= 0:
        raise ValueError("k must be positive")
    env = _as_vector_env(f)

    def _breaks(a, b):
        n = max(2, int(np.ceil((b - a) / cap)) if cap else 2, 4)
        return np.linspace(a, b, min(n, 2000) + 1)

    cap = osc_period_hint / 4.0 if osc_period_hint else None
    totals = 0.0 + 0.0j
    errors = 0.0
    # [0, k] then a geometric tail until a whole segment is negligible
    t, e, _ = integrate_panels(env, _breaks(0.0, k * (1 - 1e-12)), freq=0.0,
                               parity=["cos"], rel_tol=spec.rel_tol,
                               abs_floor=spec.abs_tol_floor,
                               max_panels=spec.max_panels)
    totals += t[0]
    errors += e[0]
    # the branch point itself sits in an excluded sliver of relative width
    # 2e-12; charge its mass to the error estimate
    edge = np.max(np.abs(env(np.array([k * (1 - 3e-12), k * (1 + 3e-12)]))))
    errors += 2e-12 * k * float(edge)
    hi = kz_max if kz_max is not None else None
    a = k * (1 + 1e-12)
    b = 4.0 * k if hi is None else hi
    while True:
        t, e, _ = integrate_panels(env, _breaks(a, b), freq=0.0,
                                   parity=["cos"], rel_tol=spec.rel_tol,
                                   abs_floor=spec.abs_tol_floor,
                                   max_panels=spec.max_panels)
        totals += t[0]
        errors += e[0]
        if hi is not None and b >= hi:
            break
        tol = spec.rel_tol * abs(totals) + spec.abs_tol_floor
        if abs(t[0]) + e[0] < 0.5 * tol and b > 8 * k:
            errors += abs(t[0])  # geometric-tail truncation bound
            break
        a, b = b, 2.0 * b
        if b > 1e9 * k:
            raise QuadratureConvergenceError(
                "kz tail did not decay before 1e9 k", partial=totals,
                est_error=errors)
    real_input = abs(totals.imag) <= 1e-12 * abs(totals.real)
    return (totals.real if real_input else totals), errors


def planck_weight(omega, temperature):
    """omega^3 / (exp(hbar omega / k_B T) - 1), overflow-safe."""
    omega = np.asarray(omega, dtype=float)
    xw = HBAR * omega / (KB * temperature)
    with np.errstate(over="ignore"):
        den = np.expm1(xw)
    out = np.where(xw < 700, omega**3 / np.where(den == 0, 1.0, den), 0.0)
    return out


def integrate_omega(f, temperature, spec: QuadratureSpec,
                    lorentz_windows=(), vectorized=False):
    """Planck-weighted frequency integral of ``f``.

    Computes ``int domega  omega^3/(e^{hbar omega/k_B T}-1) f(omega)`` over
    ``spec.omega_range_factor`` in units of k_B T / hbar.  When
    ``spec.resonance_refine`` is set, each (lo, hi) window in
    ``lorentz_windows`` seeds extra panel edges so sharp material
    resonances are found.

    Returns ``(integral, est_error)``.
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    w_th = KB * temperature / HBAR
    lo, hi = spec.omega_range_factor[0] * w_th, spec.omega_range_factor[1] * w_th
    edges = set(np.geomspace(lo, hi, 9))
    if spec.resonance_refine:
        for (a, b) in lorentz_windows:
            a, b = max(a, lo), min(b, hi)
            if a < b:
                edges.update(np.linspace(a, b, 9))
    breaks = np.array(sorted(edges))

    if vectorized:
        def env(x):
            return (planck_weight(x, temperature) * np.asarray(f(x)))[None, :]
    else:
        def env(x):
            vals = np.array([f(float(v)) for v in x], dtype=complex)
            return (planck_weight(x, temperature) * vals)[None, :]

    t, e, _ = integrate_panels(env, breaks, freq=0.0, parity=["cos"],
                               rel_tol=spec.rel_tol,
                               abs_floor=spec.abs_tol_floor,
                               max_panels=spec.max_panels)
    val = t[0]
    if abs(val.imag) <= 1e-10 * max(abs(val.real), 1e-300):
        val = val.real
    return val, e[0]


def omega_grid(omega_min, omega_max, points, scale="lin"):
    if points < 1 or omega_min <= 0 or omega_max < omega_min:
        raise ValueError("invalid omega grid")
    if points == 1:
        return np.array([omega_min])
    if scale == "log":
        return np.geomspace(omega_min, omega_max, points)
    if scale == "lin":
        return np.linspace(omega_min, omega_max, points)
    raise ValueError(f"unknown scale {scale!r}")


def spectral_curve(quantity, geometry, materials, grid_spec,
                   spec: QuadratureSpec | None = None) -> SpectralCurve:
    """Tabulate Tr Im G(r1, r1) or Tr[G G^dagger](r1, r2) versus frequency.

    ``quantity`` is ``"tr_im_g"`` or ``"tr_gg_dagger"``; ``geometry`` is a
    mapping with the cylinder radius/point coordinates, ``materials`` the
    cylinder material (or None for vacuum), ``grid_spec`` a mapping with
    omega_min/omega_max/points/scale.
    """
    from . import greens  # local import; greens depends on this module

    spec = spec or QuadratureSpec()
    omegas = omega_grid(grid_spec["omega_min"], grid_spec["omega_max"],
                        int(grid_spec.get("points", 400)),
                        grid_spec.get("scale", "lin"))
    cyl = geometry.get("cylinder")
    vals = np.empty(omegas.size, dtype=float)
    for i, w in enumerate(omegas):
        if quantity == "tr_im_g":
            p1 = geometry["p1"]
            if cyl is None:
                vals[i] = (w / 299792458.0) / (2.0 * np.pi)
            else:
                vals[i] = greens.tr_im_g_coincident(p1.r, w, cyl, spec)
        elif quantity == "tr_gg_dagger":
            vals[i] = greens.tr_gg_dagger(geometry["p1"], geometry["p2"], w,
                                          cyl, spec)
        else:
            raise ValueError(f"unknown quantity {quantity!r}")
    return SpectralCurve(omega=omegas, value=vals, quantity=quantity,
                         meta={"geometry": repr(geometry)})
