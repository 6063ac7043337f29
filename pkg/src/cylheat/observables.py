"""Heat radiation of one particle and heat transfer between two particles.

Both observables are Planck-weighted frequency integrals of polarizability
factors times Green's-tensor traces:

    HR  =  (8 hbar / c^2)  int dw  w^3 n(w) Im(alpha_1) Tr Im G(r1, r1)
    HT  = (32 pi hbar / c^4) int dw w^5 n(w) Im(alpha_1) Im(alpha_2)
          * Tr[G(r1, r2) G^dagger(r1, r2)]

with n(w) the thermal occupation of the hot particle.  Heat transfer is
reported divided by the two particle volumes, which removes the explicit
radii via Im(alpha)/V = (3/4 pi) Im (eps-1)/(eps+2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import C0, HBAR
from .greens import (ConvergenceReport, CylPoint, full_green,
                     tr_im_g0_coincident, tr_g0g0_dagger, trace_with_report)
from .materials import (CylinderSpec, LorentzOscillator, ParticleSpec,
                        PerfectConductor, clausius_mossotti, polarizability)
from .quadrature import QuadratureSpec, SpectralCurve, integrate_omega


@dataclass
class HRResult:
    watts: float
    ratio_to_vacuum: float
    convergence: ConvergenceReport
    spectrum: SpectralCurve | None = None


@dataclass
class HTResult:
    watts_per_vol2: float          # W / m^6, i.e. HT / (V1 V2)
    ratio_to_vacuum: float
    convergence: ConvergenceReport
    ratio_to_reference_angle: float | None = None
    spectrum: SpectralCurve | None = None


@dataclass(frozen=True)
class Parallel:
    """Both particles on one line parallel to the axis, distance d apart."""

    h: float
    d: float


@dataclass(frozen=True)
class Angular:
    """Equal radial coordinate r = R + h, azimuthal offset dphi, axial dz."""

    h: float
    dphi: float
    dz: float


@dataclass(frozen=True)
class Perpendicular:
    """Particles facing each other across the cylinder, d = 2 (R + h)."""

    h: float


@dataclass(frozen=True)
class General:
    p1: CylPoint
    p2: CylPoint


def _lorentz_windows(*materials):
    windows = []
    for mat in materials:
        if isinstance(mat, LorentzOscillator):
            windows.append((0.9 * mat.omega_to, 1.1 * mat.omega_lo))
    return windows


class _ReportCollector:
    """Aggregates per-frequency convergence reports of the heavy kernel."""

    def __init__(self):
        self.n_used = 0
        self.kz_panels = 0
        self.est = 0.0

    def add(self, report: ConvergenceReport | None):
        if report is None:
            return
        self.n_used = max(self.n_used, report.n_used)
        self.kz_panels += report.kz_panels
        self.est = max(self.est, report.est_rel_error)

    def merged(self, omega_rel_err) -> ConvergenceReport:
        return ConvergenceReport(n_used=self.n_used,
                                 kz_panels=self.kz_panels,
                                 est_rel_error=float(self.est + omega_rel_err))


def heat_radiation(particle: ParticleSpec, cyl: CylinderSpec | None = None,
                   h: float | None = None,
                   quad: QuadratureSpec | None = None,
                   capture_spectrum=False) -> HRResult:
    """Heat radiation of a particle at distance h from the cylinder surface.

    With no cylinder the vacuum closed form Tr Im G0 = k/2pi is used and
    the ratio to vacuum is exactly one.
    """
    quad = quad or QuadratureSpec()
    if cyl is not None:
        if h is None or h <= 0:
            raise ValueError("h > 0 is required when a cylinder is present")
        r1 = cyl.radius + h
    pref = 8.0 * HBAR / C0**2
    collector = _ReportCollector()
    samples = []
    restricted = cyl is not None and isinstance(cyl.material, PerfectConductor)

    def f(omega):
        im_alpha = polarizability(particle, omega).imag
        if cyl is None:
            trace = tr_im_g0_coincident(omega)
        else:
            trace, rep = trace_with_report(r1, omega, cyl, quad,
                                           pc_restricted=restricted)
            collector.add(rep)
        if capture_spectrum:
            samples.append((omega, trace))
        return pref * im_alpha * trace

    windows = _lorentz_windows(particle.material,
                               cyl.material if cyl else None)
    watts, err = integrate_omega(f, particle.temperature, quad,
                                 lorentz_windows=windows)
    vac = heat_radiation_vacuum(particle, quad)
    spectrum = None
    if capture_spectrum and samples:
        samples.sort()
        om = np.array([s[0] for s in samples])
        tr = np.array([s[1] for s in samples])
        keep = np.concatenate(([True], np.diff(om) > 0))
        spectrum = SpectralCurve(om[keep], tr[keep], quantity="tr_im_g")
    return HRResult(watts=float(watts), ratio_to_vacuum=float(watts / vac),
                    convergence=collector.merged(err / max(watts, 1e-300)),
                    spectrum=spectrum)


def heat_radiation_vacuum(particle: ParticleSpec,
                          quad: QuadratureSpec | None = None) -> float:
    """HR of an isolated particle, (4 hbar/(pi c^3)) int dw w^4 n(w) Im alpha."""
    quad = quad or QuadratureSpec()
    pref = 8.0 * HBAR / C0**2 / (2.0 * np.pi * C0)

    def f(omega):
        return pref * omega * polarizability(particle, omega).imag

    windows = _lorentz_windows(particle.material)
    watts, _ = integrate_omega(f, particle.temperature, quad,
                               lorentz_windows=windows)
    return float(watts)


def _pair_points(geometry, cyl: CylinderSpec | None):
    """CylPoint pair and separation for a given configuration."""
    if isinstance(geometry, General):
        p1, p2 = geometry.p1, geometry.p2
        d = math.sqrt(max(
            p1.r**2 + p2.r**2
            - 2 * p1.r * p2.r * math.cos(p2.phi - p1.phi)
            + (p2.z - p1.z) ** 2, 0.0))
        return p1, p2, d
    if cyl is None:
        if isinstance(geometry, Parallel):
            # only the separation matters without a scatterer
            r = geometry.h if geometry.h > 0 else 1.0
            return (CylPoint(r=r, phi=0.0, z=0.0),
                    CylPoint(r=r, phi=0.0, z=geometry.d), geometry.d)
        raise ValueError("angular/perpendicular geometries need a cylinder")
    if isinstance(geometry, Parallel):
        r = cyl.radius + geometry.h
        return (CylPoint(r=r, phi=0.0, z=0.0),
                CylPoint(r=r, phi=0.0, z=geometry.d), geometry.d)
    if isinstance(geometry, Angular):
        r = cyl.radius + geometry.h
        d = math.sqrt(2.0 * r**2 * (1.0 - math.cos(geometry.dphi))
                      + geometry.dz**2)
        return (CylPoint(r=r, phi=0.0, z=0.0),
                CylPoint(r=r, phi=geometry.dphi, z=geometry.dz), d)
    if isinstance(geometry, Perpendicular):
        r = cyl.radius + geometry.h
        return (CylPoint(r=r, phi=0.0, z=0.0),
                CylPoint(r=r, phi=math.pi, z=0.0), 2.0 * r)
    raise ValueError(f"unknown geometry {geometry!r}")


def heat_transfer(p1: ParticleSpec, p2: ParticleSpec, geometry,
                  cyl: CylinderSpec | None = None,
                  quad: QuadratureSpec | None = None,
                  capture_spectrum=False) -> HTResult:
    """Radiative heat transfer per unit volume product, W/m^6.

    The hot particle is ``p1``; its temperature sets the Planck factor.
    ``ratio_to_vacuum`` compares against two isolated particles at the same
    separation.
    """
    quad = quad or QuadratureSpec()
    point1, point2, d = _pair_points(geometry, cyl)
    if d <= 0:
        raise ValueError("particles must be at distinct positions")
    pref = 32.0 * np.pi * HBAR / C0**4 * (3.0 / (4.0 * np.pi)) ** 2
    collector = _ReportCollector()
    samples = []

    def trace(omega):
        if cyl is None:
            return tr_g0g0_dagger(omega, d)
        g, rep = full_green(point1, point2, omega, cyl, quad)
        collector.add(rep)
        return float(np.sum(np.abs(g.matrix) ** 2))

    def f(omega):
        im1 = clausius_mossotti(p1.material, omega).imag
        im2 = clausius_mossotti(p2.material, omega).imag
        t = trace(omega)
        if capture_spectrum:
            samples.append((omega, t))
        return pref * omega**2 * im1 * im2 * t

    def f_vac(omega):
        im1 = clausius_mossotti(p1.material, omega).imag
        im2 = clausius_mossotti(p2.material, omega).imag
        return pref * omega**2 * im1 * im2 * tr_g0g0_dagger(omega, d)

    windows = _lorentz_windows(p1.material, p2.material,
                               cyl.material if cyl else None)
    watts, err = integrate_omega(f, p1.temperature, quad,
                                 lorentz_windows=windows)
    vac, _ = integrate_omega(f_vac, p1.temperature, quad,
                             lorentz_windows=windows)
    spectrum = None
    if capture_spectrum and samples:
        samples.sort()
        om = np.array([s[0] for s in samples])
        tr = np.array([s[1] for s in samples])
        keep = np.concatenate(([True], np.diff(om) > 0))
        spectrum = SpectralCurve(om[keep], tr[keep], quantity="tr_gg_dagger")
    return HTResult(watts_per_vol2=float(watts),
                    ratio_to_vacuum=float(watts / vac),
                    convergence=collector.merged(err / max(watts, 1e-300)),
                    spectrum=spectrum)


def angular_ratio(p1: ParticleSpec, p2: ParticleSpec, h, dz,
                  cyl: CylinderSpec, quad: QuadratureSpec | None = None,
                  angles=()) -> list:
    """HT versus azimuthal angle, normalized at dphi = 0.

    Returns a list of (dphi, H(dphi)/H(0)) pairs.  The interparticle
    distance grows as d = sqrt(2 r^2 (1 - cos dphi) + dz^2); dz >> 2 r
    keeps d nearly unchanged so the ratios isolate the rotation effect.
    The kz mode integrals do not depend on dphi, so the sweep costs about
    one heat-transfer evaluation in total.
    """
    quad = quad or QuadratureSpec()
    ref = heat_transfer(p1, p2, Angular(h=h, dphi=0.0, dz=dz), cyl, quad)
    out = []
    for dphi in angles:
        res = heat_transfer(p1, p2, Angular(h=h, dphi=float(dphi), dz=dz),
                            cyl, quad)
        out.append((float(dphi), res.watts_per_vol2 / ref.watts_per_vol2))
    return out
