"""Outside scattering matrix of an infinite cylinder and stable channel sums.

The T-matrix elements couple magnetic (M) and electric (N) cylindrical waves
at fixed multipole order n and axial wavevector kz.  They are built from the
logarithmic derivatives of J and H at q R and from the J-logarithmic
derivative at q_eps R inside the material, so no Bessel function of a large
complex argument is ever formed.

Near the branch point q -> 0 the three channels MM, MN, NN diverge like
q^-4 individually while their physical combinations stay finite.  All
quantities here are therefore organized as polynomials in u = 1/(q R)^2
whose leading coefficients carry explicit factors of q^2/k^2 = 1 - kz^2/k^2,
so the cancellations are done in closed form instead of in floating point.
The Green's-function integrands consume the combinations

    W_pm = T^MM -+ 2 s T^MN + s^2 T^NN,   W_0 = T^MM - s^2 T^NN,
    V_pm = T^MN -+ s T^NN                  (s = kz/k),

which multiply products of H_{n-1} and H_{n+1} at the particle coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import C0
from .materials import CylinderSpec, PerfectConductor, eval_epsilon
from . import specfun


class ResonancePoleError(ArithmeticError):
    """Scattering denominator underflowed; input is unphysical or a bug."""


@dataclass(frozen=True)
class TElements:
    """The three scattering amplitudes at fixed (n, kz, omega); mn = nm."""

    mm: complex
    nn: complex
    mn: complex
    n: int
    kz: float
    omega: float


def axial_wavevector_q(k: float, kz: float) -> complex:
    """Radial wavevector q = sqrt(k^2 - kz^2).

    Real non-negative for |kz| <= k, +i sqrt(kz^2 - k^2) for |kz| > k.
    """
    if k <= 0:
        raise ValueError("k must be positive")
    akz = abs(kz)
    if akz <= k:
        return complex(np.sqrt((k - akz) * (k + akz)))
    return 1j * np.sqrt((akz - k) * (akz + k))


# ---------------------------------------------------------------------------
# channel tables over orders 0..n_max and a batch of kz nodes


@dataclass
class ChannelTables:
    """Stable T-matrix combinations, exp-scaled by a shared log table.

    Every mantissa array has shape (n_max+1, nb); the true value of e.g.
    W_- is ``wminus * exp(log)``.
    """

    log: np.ndarray      # shared scale, from J_n(qR)/H_n(qR)
    wminus: np.ndarray   # T^MM + 2 s T^MN + s^2 T^NN
    wplus: np.ndarray    # T^MM - 2 s T^MN + s^2 T^NN
    wzero: np.ndarray    # T^MM - s^2 T^NN
    vminus: np.ndarray   # T^MN + s T^NN
    vplus: np.ndarray    # T^MN - s T^NN
    tnn: np.ndarray      # T^NN
    tmm: np.ndarray      # T^MM
    tmn: np.ndarray      # T^MN


def _ratio_tables(n_max, x, mant, logs):
    """Adjacent-order ratios F_{n-1}/(x F_n) and F_{n+1}/(x F_n).

    ``mant``/``logs`` must cover orders 0..n_max+1.  Order -1 maps to order
    1 with a sign flip (F_{-1} = -F_1).
    """
    down = np.empty((n_max + 1,) + x.shape, dtype=complex)
    up = np.empty_like(down)
    up[:] = mant[1:n_max + 2] * np.exp(logs[1:n_max + 2] - logs[0:n_max + 1]) \
        / (x[None, :] * mant[0:n_max + 1])
    down[1:] = mant[0:n_max] * np.exp(logs[0:n_max] - logs[1:n_max + 1]) \
        / (x[None, :] * mant[1:n_max + 1])
    down[0] = -up[0]
    return down, up


def channel_tables(n_max, omega, kz, cyl: CylinderSpec):
    """Build ChannelTables for orders 0..n_max at the given kz nodes."""
    kz = np.asarray(kz, dtype=float)
    k = omega / C0
    R = cyl.radius
    q2 = (k - kz) * (k + kz)
    prop = kz < k
    q = np.where(prop, np.sqrt(np.abs(q2)), 0.0) + 1j * np.where(
        prop, 0.0, np.sqrt(np.abs(q2)))
    x = q * R
    u = 1.0 / (x * x)
    sig = kz / k
    sig2 = sig * sig
    s2 = q2 / k**2                      # 1 - sig^2, exact

    # J and H chains at qR, split by argument class
    jm = np.empty((n_max + 2, kz.size), dtype=complex)
    jl = np.empty((n_max + 2, kz.size), dtype=float)
    hm = np.empty_like(jm)
    hl = np.empty_like(jl)
    if prop.any():
        xr = x[prop].real
        jm[:, prop], jl[:, prop] = specfun.j_chain_real(n_max + 1, xr)
        hm[:, prop], hl[:, prop] = specfun.h1_chain_real(n_max + 1, xr)
    if (~prop).any():
        y = x[~prop].imag
        jm[:, ~prop], jl[:, ~prop] = specfun.j_chain_imag(n_max + 1, y)
        hm[:, ~prop], hl[:, ~prop] = specfun.h1_chain_imag(n_max + 1, y)

    jh = jm[:n_max + 1] / hm[:n_max + 1]
    jh_log = jl[:n_max + 1] - hl[:n_max + 1]
    a0, _ = _ratio_tables(n_max, x, hm, hl)
    _, beta = _ratio_tables(n_max, x, jm, jl)

    n = np.arange(n_max + 1, dtype=float)[:, None]
    if isinstance(cyl.material, PerfectConductor):
        inv_kr2 = 1.0 / (k * R) ** 2
        a_log = a0 - n * u[None, :]          # H'_n/(x H_n)
        num_p = n * inv_kr2 - beta + sig2[None, :] * a0
        num_0 = n * (1.0 + sig2[None, :]) * u[None, :] - beta - sig2[None, :] * a0
        wpm = -jh * num_p / a_log
        wzero = -jh * num_0 / a_log
        tnn = -jh
        tmm = -jh * (n * u[None, :] - beta) / a_log
        tmn = np.zeros_like(jh)
        return ChannelTables(log=jh_log, wminus=wpm, wplus=wpm.copy(),
                             wzero=wzero, vminus=-sig[None, :] * jh,
                             vplus=sig[None, :] * jh, tnn=tnn, tmm=tmm,
                             tmn=tmn)

    eps = eval_epsilon(cyl.material, omega)
    mu = complex(cyl.material.mu)
    e, m_ = 1.0 / eps, 1.0 / mu
    w = e * m_
    qe2 = eps * mu * k**2 - kz**2
    t = 1.0 / (qe2 * R**2)
    L = specfun.logderiv_j_chain(n_max, np.sqrt(qe2.astype(complex)) * R)

    d1 = L - e * a0
    d2 = L - m_ * a0
    d3 = L + e * beta
    d4 = L + m_ * beta

    u_ = u[None, :]
    sig_ = sig[None, :]
    sig2_ = sig2[None, :]
    s2_ = s2[None, :]
    t_ = t[None, :]
    n2 = n * n

    le_m = n * L * (e - m_)
    ab = a0 + beta
    nwab = n * w * ab
    kk = n2 * sig2_ * w * t_              # g k0 = K-cross piece
    kk2 = n2 * sig2_ * w * t_ * t_        # k0^2

    dd = _poly(u_, n2 * w * s2_, n * (e * d2 + m_ * d1) + 2.0 * kk,
               d1 * d2 - kk2)
    bp = _poly(u_, -n2 * w * s2_ * s2_,
               s2_ * (le_m + nwab - 2.0 * kk),
               d1 * d4 + sig2_ * d2 * d3 - (1.0 + sig2_) * kk2
               + 2.0 * n * sig2_ * w * t_ * ab)
    bm = _poly(u_, -n2 * w * ((1.0 + sig2_) ** 2 + 4.0 * sig2_),
               le_m * s2_ + nwab * (1.0 + 3.0 * sig2_)
               + 2.0 * kk * (3.0 + sig2_),
               d1 * d4 + sig2_ * d2 * d3 - (1.0 + sig2_) * kk2
               - 2.0 * n * sig2_ * w * t_ * ab)
    b0 = _poly(u_, -n2 * w * (1.0 + sig2_) * s2_,
               le_m * (1.0 + sig2_) + nwab * s2_ + 2.0 * kk * s2_,
               d1 * d4 - sig2_ * d2 * d3 - s2_ * kk2)
    n33 = _poly(u_, -n2 * w * (1.0 + sig2_),
                -le_m + nwab + 2.0 * kk,
                d2 * d3 - kk2)
    vp = _poly(u_, n2 * sig_ * w * s2_,
               -2.0 * n2 * sig_ * w * t_ * s2_ - sig_ * le_m,
               n * sig_ * w * t_ * ab + sig_ * (d2 * d3 - kk2))
    vm = _poly(u_, n2 * sig_ * w * (3.0 + sig2_),
               -2.0 * n2 * sig_ * w * t_ * (1.0 + sig2_)
               - 2.0 * n * sig_ * w * ab + sig_ * le_m,
               n * sig_ * w * t_ * ab - sig_ * (d2 * d3 - kk2))
    mm_num = _poly(u_, -n2 * w * (1.0 + sig2_),
                   le_m + nwab + 2.0 * kk,
                   d1 * d4 - kk2)
    mn_num = _poly(u_, 2.0 * n2 * sig_ * w,
                   -2.0 * n2 * sig_ * w * t_ - n * sig_ * w * ab,
                   n * sig_ * w * t_ * ab)

    return ChannelTables(log=jh_log,
                         wminus=-jh * bm / dd, wplus=-jh * bp / dd,
                         wzero=-jh * b0 / dd,
                         vminus=jh * vm / dd, vplus=jh * vp / dd,
                         tnn=-jh * n33 / dd, tmm=-jh * mm_num / dd,
                         tmn=jh * mn_num / dd)


def _poly(u, c2, c1, c0):
    return (c2 * u + c1) * u + c0


# ---------------------------------------------------------------------------
# public single-point T-matrix


def tmatrix(n: int, kz: float, omega: float, cyl: CylinderSpec) -> TElements:
    """Scattering amplitudes T^MM, T^NN, T^MN of a finite-eps cylinder.

    ``kz = k`` exactly is excluded; quadrature rules never sample it.  Deep
    in the evanescent region the raw amplitudes grow like e^{2 Im(q) R} and
    may overflow; the Green's-function kernels use the scaled tables
    instead of this interface.
    """
    if isinstance(cyl.material, PerfectConductor):
        return tmatrix_pc(n, kz, omega, cyl.radius)
    if n < 0 or n != int(n):
        raise ValueError("tmatrix takes n >= 0; use tmatrix_signed")
    k = omega / C0
    if abs(kz) == k:
        raise ValueError("kz = k is excluded (q = 0)")
    tab = channel_tables(int(n), omega, np.array([abs(kz)]), cyl)
    scale = np.exp(tab.log[n, 0])
    mm = complex(tab.tmm[n, 0] * scale)
    nn = complex(tab.tnn[n, 0] * scale)
    mn = complex(tab.tmn[n, 0] * scale)
    if kz < 0:
        mn = -mn
    for val in (mm, nn, mn):
        if not np.isfinite([val.real, val.imag]).all():
            raise ResonancePoleError(
                f"T-matrix element non-finite at n={n}, kz={kz}, omega={omega}")
    return TElements(mm=mm, nn=nn, mn=mn, n=int(n), kz=kz, omega=omega)


def tmatrix_pc(n: int, kz: float, omega: float, R: float) -> TElements:
    """Perfect-conductor limit: mm = -J'_n/H'_n, nn = -J_n/H_n, mn = 0."""
    if n < 0 or n != int(n):
        raise ValueError("tmatrix_pc takes n >= 0; use tmatrix_signed")
    k = omega / C0
    if abs(kz) == k:
        raise ValueError("kz = k is excluded (q = 0)")
    q = axial_wavevector_q(k, kz)
    x = q * R
    jn = specfun.bessel_j(n, x)
    hn = specfun.hankel1(n, x)
    jp = specfun.bessel_j_deriv(n, x)
    hp = specfun.hankel1_deriv(n, x)
    return TElements(mm=-jp / hp, nn=-jn / hn, mn=0.0j, n=int(n), kz=kz,
                     omega=omega)


def tmatrix_signed(n: int, kz: float, omega: float, cyl: CylinderSpec) -> TElements:
    """T elements for any sign of n and kz via the reflection relations.

    mm and nn are even under n -> -n and kz -> -kz; mn flips sign under
    either one.
    """
    base = tmatrix(abs(int(n)), abs(kz), omega, cyl)
    sign = 1.0
    if n < 0:
        sign = -sign
    if kz < 0:
        sign = -sign
    return TElements(mm=base.mm, nn=base.nn, mn=sign * base.mn,
                     n=int(n), kz=kz, omega=omega)
