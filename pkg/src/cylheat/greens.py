"""Free-space and cylinder-scattering dyadic Green's tensors.

The free tensor is the closed-form Helmholtz dyadic (the delta self-term is
dropped throughout; it contributes nothing to the traces used here),
expressed either in a Cartesian frame or rotated to the cylindrical basis.

The scattering part is a multipole sum of kz integrals.  For every tensor
element the integrand is regrouped into products of H_{n-1} / H_{n+1} at
the two radial coordinates times the stable channel combinations W/V from
``scattering``; that regrouping is what keeps the integrand finite through
the q -> 0 branch point.  All Bessel factors flow through the exp-scaled
chains, and exponents are summed analytically before the single final
exponentiation, so the evanescent region never overflows.

Conventions: points are (r, phi, z); for a pair (p1, p2) the tensor is
G(p1, p2) with dphi = p2.phi - p1.phi and dz = p2.z - p1.z, matching the
reciprocity relation G(p1, p2) = G^T(p2, p1).
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .constants import C0
from .materials import CylinderSpec, PerfectConductor, material_key
from .quadrature import (QuadratureSpec, QuadratureConvergenceError,
                         integrate_panels)
from .scattering import channel_tables
from . import specfun


class GreensConvergenceError(RuntimeError):
    """kz panels or multipole budget exhausted; carries partial data."""

    def __init__(self, message, partial=None, report=None):
        super().__init__(message)
        self.partial = partial
        self.report = report


@dataclass(frozen=True)
class CylPoint:
    """A point in cylindrical coordinates (r, phi, z)."""

    r: float
    phi: float
    z: float

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError("r must be positive")


@dataclass
class GreensTensor:
    """3x3 complex dyadic in the (r, phi, z) basis, units 1/m."""

    matrix: np.ndarray
    omega: float
    report: "ConvergenceReport | None" = None

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        if self.matrix.shape != (3, 3):
            raise ValueError("Greens tensor must be 3x3")


@dataclass
class ConvergenceReport:
    n_used: int
    kz_panels: int
    est_rel_error: float
    flags: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# free Green's tensor


def u_matrix(phi):
    """Cartesian -> cylindrical basis rotation at azimuth phi."""
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])


def g0_cartesian(r1, r2, omega) -> GreensTensor:
    """Free dyadic between Cartesian points r1, r2 (delta term omitted)."""
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    dvec = r1 - r2
    d = float(np.linalg.norm(dvec))
    if d == 0.0:
        raise ValueError("coincident points: use the coincident-trace "
                         "identities instead of the raw free tensor")
    k = omega / C0
    kd = k * d
    pref = np.exp(1j * kd) / (4.0 * np.pi * k**2 * d**5)
    iso = d**2 * (-1.0 + 1j * kd + kd**2)
    aniso = (3.0 - 3j * kd - kd**2)
    mat = pref * (iso * np.eye(3) + aniso * np.outer(dvec, dvec))
    return GreensTensor(matrix=mat, omega=omega)


def cyl_to_cart(p: CylPoint):
    return np.array([p.r * math.cos(p.phi), p.r * math.sin(p.phi), p.z])


def pair_distance(p1: CylPoint, p2: CylPoint) -> float:
    dphi = p2.phi - p1.phi
    return math.sqrt(p1.r**2 + p2.r**2 - 2.0 * p1.r * p2.r * math.cos(dphi)
                     + (p2.z - p1.z) ** 2)


def g0_cylindrical(p1: CylPoint, p2: CylPoint, omega) -> GreensTensor:
    """Free dyadic in the cylindrical basis, U(phi1) G0 U^T(phi2)."""
    r, rp = p1.r, p2.r
    dphi = p2.phi - p1.phi
    dz = p2.z - p1.z
    d = pair_distance(p1, p2)
    if d == 0.0:
        raise ValueError("coincident points: use the coincident-trace "
                         "identities instead of the raw free tensor")
    k = omega / C0
    kd = k * d
    pref = np.exp(1j * kd) / (4.0 * np.pi * k**2 * d**5)
    iso = d**2 * (-1.0 + 1j * kd + kd**2)
    aniso = (3.0 - 3j * kd - kd**2)
    cd, sd = math.cos(dphi), math.sin(dphi)
    rot = np.array([[cd, -sd, 0.0], [sd, cd, 0.0], [0.0, 0.0, 1.0]])
    dyad = np.array([
        [(rp * cd - r) * (rp - r * cd), (rp * cd - r) * r * sd,
         (rp * cd - r) * dz],
        [(rp - r * cd) * rp * sd, r * rp * sd**2, rp * sd * dz],
        [(rp - r * cd) * dz, r * sd * dz, dz**2],
    ])
    return GreensTensor(matrix=pref * (iso * rot + aniso * dyad), omega=omega)


def tr_im_g0_coincident(omega) -> float:
    """Tr Im G0(r, r) = k / (2 pi)."""
    return omega / C0 / (2.0 * np.pi)


def tr_g0g0_dagger(omega, d) -> float:
    """Closed form Tr[G0 G0^dagger] = (1 + (kd)^-2 + 3 (kd)^-4)/(8 pi^2 d^2)."""
    if d <= 0:
        raise ValueError("d must be positive")
    kd = omega / C0 * d
    return (1.0 + kd**-2 + 3.0 * kd**-4) / (8.0 * np.pi**2 * d**2)


# ---------------------------------------------------------------------------
# scattering part: mode engine

_COS_KINDS = {"11", "22", "33", "13", "31", "trace"}
_KZ_PARITY = {"11": "cos", "12": "cos", "21": "cos", "22": "cos",
              "33": "cos", "13": "sin", "31": "sin", "23": "sin",
              "32": "sin", "trace": "cos"}

_MODE_CACHE: OrderedDict = OrderedDict()
_MODE_CACHE_MAX = 1024


def _chain_mixed(m_max, qabs, prop, radius):
    """Scaled H chains of argument q * radius over mixed-branch nodes."""
    mant = np.empty((m_max + 1, qabs.size), dtype=complex)
    logs = np.empty((m_max + 1, qabs.size), dtype=float)
    if prop.any():
        mant[:, prop], logs[:, prop] = specfun.h1_chain_real(
            m_max, qabs[prop] * radius)
    if (~prop).any():
        mant[:, ~prop], logs[:, ~prop] = specfun.h1_chain_imag(
            m_max, qabs[~prop] * radius)
    return mant, logs


def _wave_slices(mant, logs, ns):
    """(minus, zero, plus) order tables for the block orders ``ns``.

    Order -1 maps to -H_1 per the reflection rule.
    """
    idx_m = np.where(ns == 0, 1, np.abs(ns - 1))
    sign_m = np.where(ns == 0, -1.0, 1.0)[:, None]
    pm = (sign_m * mant[idx_m], logs[idx_m])
    pz = (mant[ns], logs[ns])
    pp = (mant[ns + 1], logs[ns + 1])
    return pm, pz, pp


def _combine(*terms):
    """Sum of scaled products: terms are (mantissa, log) pairs."""
    logs = np.stack([t[1] for t in terms])
    mref = logs.max(axis=0)
    out = np.zeros_like(terms[0][0])
    for mant, lg in terms:
        with np.errstate(under="ignore"):
            out = out + mant * np.exp(lg - mref)
    with np.errstate(under="ignore", over="ignore"):
        val = out * np.exp(mref)
    return np.where(np.isfinite(mref), val, 0.0)


def _order_blocks(cap):
    edges = [0, 6, 12, 18, 26, 36, 48, 64, 84, 110, 144, 190, 250, 330, 440]
    blocks = []
    lo = 0
    for e in edges[1:]:
        hi = min(e - 1, cap)
        if hi >= lo:
            blocks.append((lo, hi))
        if hi >= cap:
            break
        lo = e
    return blocks


_EULER_GAMMA = 0.5772156649015329
_BRANCH_CUT = 1e-9  # relative half-width of the window handled analytically


def _initial_breaks(k, kz_max, domain, deep_ladder):
    # quarter-decade ladder into the branch point: keeps the 1/(k - kz)
    # near-branch growth well conditioned for the panel polynomials.  The
    # full depth is only needed for the perfect conductor, whose n = 0
    # channel decays into the branch point like 1/ln; for lossy materials
    # the integrand is bounded there and adaptivity handles the corner.
    floor = _BRANCH_CUT if deep_ladder else 1e-3
    ladder = 10.0 ** np.arange(-0.5, np.log10(floor) + 0.2, -0.25)
    prop = k * np.concatenate(([0.0, 0.35], 1.0 - ladder,
                               [1.0 - _BRANCH_CUT]))
    prop = np.unique(prop)
    if domain == "prop":
        return (prop,)
    kappa_max = math.sqrt(max(kz_max**2 - k**2, (1e-3 * k) ** 2))
    kappas = [kappa_max]
    while kappas[-1] > 0.05 * k:
        kappas.append(kappas[-1] / 2.0)
    evan = np.sqrt(k**2 + np.array(kappas) ** 2)
    near = k * np.concatenate(([1.0 + _BRANCH_CUT], 1.0 + ladder))
    return prop, np.unique(np.concatenate([near, evan]))


def _pc_branch_tail(k, r, rp, R, dz, domain):
    """Analytic branch-window integral of the perfect-conductor n=0 term.

    Inside |kz - k| < cut * k the n = 0 NN integrand of the 11/trace kinds
    behaves as (4/(pi^2 q^2 r r')) / (1 + i y) on the propagating side and
    as (4 i /(pi^2 kappa^2 r r')) / y on the evanescent side, with
    y = (2/pi)(ln(|q| R / 2) + gamma_E).  In the variable y both sides
    integrate to elementary logs; their individually log-log divergent
    imaginary parts cancel, leaving the closed form used here.
    """
    qc = k * math.sqrt(_BRANCH_CUT * (2.0 - _BRANCH_CUT))
    yc = (2.0 / math.pi) * (math.log(qc * R / 2.0) + _EULER_GAMMA)
    pref = 2.0 / (math.pi * k * r * rp)
    re_part = pref * (math.atan2(yc, 1.0) + math.pi / 2.0)
    if domain == "prop":
        return complex(re_part * math.cos(k * dz))
    im_part = pref * (math.log(-yc) - 0.5 * math.log1p(yc * yc))
    return complex(re_part, im_part) * math.cos(k * dz)


def _mode_env_factory(kinds, ns, n_hi, r, rp, omega, cyl):
    k = omega / C0

    def env(kz):
        kz = np.asarray(kz, dtype=float)
        q2 = (k - kz) * (k + kz)
        prop = kz < k
        qabs = np.sqrt(np.abs(q2))
        q = np.where(prop, qabs, 0.0) + 1j * np.where(prop, 0.0, qabs)
        s2 = q2 / k**2
        tab = channel_tables(n_hi, omega, kz, cyl)
        hr = _chain_mixed(n_hi + 1, qabs, prop, r)
        hp = hr if rp == r else _chain_mixed(n_hi + 1, qabs, prop, rp)
        pm, pz, pp = _wave_slices(*hr, ns)
        qm, qz, qp = _wave_slices(*hp, ns)
        wlog = tab.log[ns]
        wm = (tab.wminus[ns], wlog)
        wp_ = (tab.wplus[ns], wlog)
        w0 = (tab.wzero[ns], wlog)
        vm = (tab.vminus[ns], wlog)
        vp_ = (tab.vplus[ns], wlog)
        tnn = (tab.tnn[ns], wlog)

        def prod(a, b, w):
            return (a[0] * b[0] * w[0], a[1] + b[1] + w[1])

        q2k = (q / (2.0 * k))[None, :]
        out = []
        for kind in kinds:
            if kind == "11":
                val = 0.25 * _combine(prod(pm, qm, wm), prod(pp, qp, wp_),
                                      prod(pm, qp, w0), prod(pp, qm, w0))
            elif kind == "22":
                val = 0.25 * _combine(
                    prod(pm, qm, wm), prod(pp, qp, wp_),
                    (-prod(pm, qp, w0)[0], prod(pm, qp, w0)[1]),
                    (-prod(pp, qm, w0)[0], prod(pp, qm, w0)[1]))
            elif kind == "12":
                t1 = prod(pm, qm, wm)
                t2 = prod(pp, qp, wp_)
                t3 = prod(pp, qm, w0)
                t4 = prod(pm, qp, w0)
                val = -0.25 * _combine(t1, (-t2[0], t2[1]), t3,
                                       (-t4[0], t4[1]))
            elif kind == "21":
                t1 = prod(pm, qm, wm)
                t2 = prod(pp, qp, wp_)
                t3 = prod(pm, qp, w0)
                t4 = prod(pp, qm, w0)
                val = 0.25 * _combine(t1, (-t2[0], t2[1]), t3,
                                      (-t4[0], t4[1]))
            elif kind == "13":
                val = q2k * _combine(prod(pm, qz, vm), prod(pp, qz, vp_))
            elif kind == "31":
                val = -q2k * _combine(prod(pz, qm, vm), prod(pz, qp, vp_))
            elif kind == "23":
                t = prod(pp, qz, vp_)
                val = q2k * _combine(prod(pm, qz, vm), (-t[0], t[1]))
            elif kind == "32":
                t = prod(pz, qp, vp_)
                val = q2k * _combine(prod(pz, qm, vm), (-t[0], t[1]))
            elif kind == "33":
                val = s2[None, :] * _combine(prod(pz, qz, tnn))
            elif kind == "trace":
                val = 0.5 * _combine(prod(pm, qm, wm), prod(pp, qp, wp_)) \
                    + s2[None, :] * _combine(prod(pz, qz, tnn))
            else:
                raise ValueError(f"unknown kind {kind!r}")
            out.append(val)
        return np.concatenate(out, axis=0)

    return env


def _mode_sums(kinds, r, rp, dz, omega, cyl: CylinderSpec,
               quad: QuadratureSpec, domain="full"):
    """kz-integrated mode coefficients C_kind[n] and a convergence report.

    The scattering tensor element (i j) is then
    (i / 2 pi) * [ C_ij(0)/2 + sum_{n>=1} C_ij(n) * trig(n dphi) ].
    """
    kinds = tuple(kinds)
    key = (kinds, float(r), float(rp), float(dz), float(omega), cyl.radius,
           material_key(cyl.material), quad.key(), domain)
    if key in _MODE_CACHE:
        _MODE_CACHE.move_to_end(key)
        return _MODE_CACHE[key]

    if min(r, rp) <= cyl.radius:
        raise ValueError("points must lie outside the cylinder")
    k = omega / C0
    gap = r + rp - 2.0 * cyl.radius
    kappa_max = quad.evanescent_lambda / gap
    kz_max = math.hypot(k, kappa_max)
    is_pc = isinstance(cyl.material, PerfectConductor)
    break_sets = _initial_breaks(k, kz_max, domain, deep_ladder=is_pc)

    coeffs = {kind: [] for kind in kinds}
    parity_base = [_KZ_PARITY[kind] for kind in kinds]
    total_panels = 0
    kz_err = 0.0
    flags = []
    norm = 0.0
    run_sum = {kind: 0.0 + 0.0j for kind in kinds}
    consec = 0
    n_used = None
    deltas_tail = []

    for (lo, hi) in _order_blocks(quad.n_max_cap):
        ns = np.arange(lo, hi + 1)
        env = _mode_env_factory(kinds, ns, hi, r, rp, omega, cyl)
        parity = [p for p in parity_base for _ in ns]
        totals = 0.0
        errors = 0.0
        try:
            for breaks in break_sets:
                t_part, e_part, n_panels = integrate_panels(
                    env, breaks, freq=dz, parity=parity,
                    rel_tol=quad.rel_tol, abs_floor=quad.abs_tol_floor,
                    max_panels=quad.max_panels,
                    abs_cap=0.02 * quad.rel_tol * norm)
                totals = totals + t_part
                errors = errors + e_part
                total_panels += n_panels
        except QuadratureConvergenceError as exc:
            raise GreensConvergenceError(
                f"kz integration failed in orders [{lo}, {hi}]: {exc}",
                partial={k2: np.array(v) for k2, v in coeffs.items()},
                report=ConvergenceReport(lo, total_panels, math.inf,
                                         ["kz_budget"])) from exc
        totals = totals.reshape(len(kinds), ns.size)
        errors = errors.reshape(len(kinds), ns.size)
        kz_err += float(errors.sum())
        for i, kind in enumerate(kinds):
            coeffs[kind].extend(totals[i])
        for j, n in enumerate(ns):
            w = 0.5 if n == 0 else 1.0
            delta = max(abs(totals[i, j]) * w for i in range(len(kinds)))
            for i, kind in enumerate(kinds):
                run_sum[kind] += w * totals[i, j]
            norm = max(norm, delta,
                       max(abs(run_sum[kind]) for kind in kinds))
            deltas_tail.append(delta)
            if n >= 2 and delta < quad.rel_tol * norm:
                consec += 1
            else:
                consec = 0
            if consec >= quad.consecutive_small:
                n_used = int(n)
                break
        if n_used is not None:
            break
    if n_used is None:
        n_used = quad.n_max_cap
        flags.append("multipole_cap")

    if isinstance(cyl.material, PerfectConductor):
        corr = _pc_branch_tail(k, r, rp, cyl.radius, dz, domain)
        for kind in kinds:
            if kind in ("11", "trace"):
                coeffs[kind][0] = coeffs[kind][0] + corr

    tail = sum(deltas_tail[-quad.consecutive_small:])
    est = (kz_err + tail) / max(norm, 1e-300)
    report = ConvergenceReport(n_used=n_used, kz_panels=total_panels,
                               est_rel_error=float(est), flags=flags)
    out = ({kind: np.array(vals) for kind, vals in coeffs.items()}, report)
    _MODE_CACHE[key] = out
    if len(_MODE_CACHE) > _MODE_CACHE_MAX:
        _MODE_CACHE.popitem(last=False)
    return out


def _assemble(coeffs, dphi):
    """(i/2pi) * [C_0/2 + sum_n C_n trig(n dphi)] for every kind."""
    out = {}
    for kind, arr in coeffs.items():
        ns = np.arange(arr.size)
        w = np.ones(arr.size)
        if arr.size:
            w[0] = 0.5
        trig = np.cos(ns * dphi) if kind in _COS_KINDS else np.sin(ns * dphi)
        out[kind] = 1j / (2.0 * np.pi) * np.sum(w * arr * trig)
    return out


def gt_general(p1: CylPoint, p2: CylPoint, omega, cyl: CylinderSpec,
               quad: QuadratureSpec | None = None):
    """Scattering part of the Green's tensor for arbitrary outside points.

    Returns ``(GreensTensor, ConvergenceReport)``.
    """
    quad = quad or QuadratureSpec()
    dphi = p2.phi - p1.phi
    dz = p2.z - p1.z
    equal_r = p1.r == p2.r
    kinds = ("11", "22", "33", "12", "13", "23") if equal_r else \
        ("11", "22", "33", "12", "21", "13", "31", "23", "32")
    coeffs, report = _mode_sums(kinds, p1.r, p2.r, dz, omega, cyl, quad)
    g = _assemble(coeffs, dphi)
    m = np.zeros((3, 3), dtype=complex)
    m[0, 0], m[1, 1], m[2, 2] = g["11"], g["22"], g["33"]
    m[0, 1], m[0, 2], m[1, 2] = g["12"], g["13"], g["23"]
    if equal_r:
        m[1, 0], m[2, 0], m[2, 1] = -g["12"], -g["13"], g["23"]
    else:
        m[1, 0], m[2, 0], m[2, 1] = g["21"], g["31"], g["32"]
    return GreensTensor(matrix=m, omega=omega, report=report), report


def gt_parallel(h, d, omega, cyl: CylinderSpec,
                quad: QuadratureSpec | None = None) -> GreensTensor:
    """Scattering tensor for both points on a line parallel to the axis.

    r = r' = R + h, dphi = 0, dz = d; the only independent elements are
    (11, 22, 33, 13), with G31 = -G13.
    """
    quad = quad or QuadratureSpec()
    if h <= 0:
        raise ValueError("h must be positive")
    r = cyl.radius + h
    coeffs, report = _mode_sums(("11", "22", "33", "13"), r, r, d, omega,
                                cyl, quad)
    g = _assemble(coeffs, 0.0)
    m = np.zeros((3, 3), dtype=complex)
    m[0, 0], m[1, 1], m[2, 2] = g["11"], g["22"], g["33"]
    m[0, 2], m[2, 0] = g["13"], -g["13"]
    return GreensTensor(matrix=m, omega=omega, report=report)


def gt_perpendicular(h, omega, cyl: CylinderSpec,
                     quad: QuadratureSpec | None = None) -> GreensTensor:
    """Scattering tensor for points facing each other across the cylinder.

    r = r' = R + h, dphi = pi, dz = 0; the tensor is diagonal.
    """
    quad = quad or QuadratureSpec()
    if h <= 0:
        raise ValueError("h must be positive")
    r = cyl.radius + h
    coeffs, report = _mode_sums(("11", "22", "33"), r, r, 0.0, omega, cyl,
                                quad)
    g = _assemble(coeffs, np.pi)
    m = np.diag([g["11"], g["22"], g["33"]]).astype(complex)
    return GreensTensor(matrix=m, omega=omega, report=report)


def trace_with_report(r, omega, cyl: CylinderSpec, quad: QuadratureSpec,
                      pc_restricted=False):
    """(Tr Im G(r, r), ConvergenceReport) for the coincident-point trace."""
    if pc_restricted and not isinstance(cyl.material, PerfectConductor):
        raise ValueError("restricted-range trace is a perfect-conductor "
                         "identity")
    domain = "prop" if pc_restricted else "full"
    coeffs, report = _mode_sums(("trace",), r, r, 0.0, omega, cyl, quad,
                                domain=domain)
    arr = coeffs["trace"]
    w = np.ones(arr.size)
    w[0] = 0.5
    val = tr_im_g0_coincident(omega) + float(np.sum(w * arr).real) / (2.0 * np.pi)
    return val, report


def tr_im_g_coincident(r, omega, cyl: CylinderSpec | None,
                       quad: QuadratureSpec | None = None,
                       pc_restricted=False) -> float:
    """Tr Im G(r, r) = k/2pi + Im Tr G_T(r, r), in 1/m.

    With ``pc_restricted`` (perfect conductor only) the scattering part is
    evaluated from the real part of the propagating-range integral alone,
    which is an identity for the lossless cylinder.
    """
    quad = quad or QuadratureSpec()
    if cyl is None:
        return tr_im_g0_coincident(omega)
    return trace_with_report(r, omega, cyl, quad, pc_restricted)[0]


def full_green(p1: CylPoint, p2: CylPoint, omega, cyl: CylinderSpec | None,
               quad: QuadratureSpec | None = None):
    """G = G0 + G_T between two distinct outside points."""
    g0 = g0_cylindrical(p1, p2, omega)
    if cyl is None:
        return g0, ConvergenceReport(0, 0, 0.0)
    gt, report = gt_general(p1, p2, omega, cyl, quad)
    return GreensTensor(matrix=g0.matrix + gt.matrix, omega=omega,
                        report=report), report


def tr_gg_dagger(p1: CylPoint, p2: CylPoint, omega,
                 cyl: CylinderSpec | None,
                 quad: QuadratureSpec | None = None) -> float:
    """Tr[G G^dagger] at two distinct points, in 1/m^2."""
    g, _ = full_green(p1, p2, omega, cyl, quad)
    return float(np.sum(np.abs(g.matrix) ** 2))


def clear_mode_cache():
    _MODE_CACHE.clear()
