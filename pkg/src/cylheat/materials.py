"""Frequency-dependent dielectric models and derived material scales.

A material is one of four variants: a Lorentz oscillator (SiC-type phonon
resonance), a Drude metal, a perfect conductor, or vacuum.  The perfect
conductor carries no finite permittivity; callers must branch to the
dedicated scattering-matrix limit instead of faking a large epsilon.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field

from .constants import C0, HBAR, KB


class NoFinitePermittivity(ValueError):
    """Raised when a finite epsilon(omega) is requested from a perfect conductor."""


@dataclass(frozen=True)
class LorentzOscillator:
    """eps(w) = eps_inf * (w^2 - w_LO^2 + i w gamma) / (w^2 - w_TO^2 + i w gamma)."""

    eps_inf: float
    omega_lo: float   # rad/s
    omega_to: float   # rad/s
    gamma: float      # rad/s
    mu: float = 1.0

    def __post_init__(self):
        if min(self.eps_inf, self.omega_lo, self.omega_to, self.gamma) <= 0:
            raise ValueError("Lorentz oscillator parameters must be strictly positive")


@dataclass(frozen=True)
class Drude:
    """eps(w) = 1 - w_p^2 / (w (w + i w_tau))."""

    omega_p: float    # rad/s
    omega_tau: float  # rad/s
    mu: float = 1.0

    def __post_init__(self):
        if min(self.omega_p, self.omega_tau) <= 0:
            raise ValueError("Drude parameters must be strictly positive")


@dataclass(frozen=True)
class PerfectConductor:
    """|eps| -> infinity limit; handled structurally, never as a big number."""

    mu: float = 1.0


@dataclass(frozen=True)
class Vacuum:
    mu: float = 1.0


MaterialModel = LorentzOscillator | Drude | PerfectConductor | Vacuum


@dataclass(frozen=True)
class ParticleSpec:
    """A dipolar particle: radius, dielectric model, and temperature."""

    radius: float        # m
    material: MaterialModel
    temperature: float   # K

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("particle radius must be positive")
        if self.temperature <= 0:
            raise ValueError("particle temperature must be positive")


@dataclass(frozen=True)
class CylinderSpec:
    """An infinitely long cylinder: radius and material."""

    radius: float        # m
    material: MaterialModel

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("cylinder radius must be positive")


# Parameters quoted for alpha-SiC (Spitzer-type phonon model) and Drude gold.
SIC = LorentzOscillator(eps_inf=6.7, omega_lo=1.82e14, omega_to=1.49e14,
                        gamma=8.93e11)
GOLD = Drude(omega_p=1.37e16, omega_tau=4.06e13)
PEC = PerfectConductor()
VACUUM = Vacuum()

PRESETS = {"sic": SIC, "gold": GOLD, "pec": PEC, "vacuum": VACUUM}


def eval_epsilon(material: MaterialModel, omega: float) -> complex:
    """Complex permittivity of ``material`` at angular frequency ``omega``.

    Parameters
    ----------
    material : MaterialModel
        Any variant except PerfectConductor.
    omega : float
        Angular frequency in rad/s, > 0.

    Returns
    -------
    complex
        eps(omega); exactly 1 for vacuum.
    """
    if omega <= 0:
        raise ValueError("omega must be positive")
    if isinstance(material, Vacuum):
        return 1.0 + 0.0j
    if isinstance(material, LorentzOscillator):
        w2 = omega * omega
        num = w2 - material.omega_lo**2 + 1j * omega * material.gamma
        den = w2 - material.omega_to**2 + 1j * omega * material.gamma
        return material.eps_inf * num / den
    if isinstance(material, Drude):
        return 1.0 - material.omega_p**2 / (omega * (omega + 1j * material.omega_tau))
    raise NoFinitePermittivity(
        "perfect conductor has no finite permittivity; use the |eps|->inf "
        "scattering-matrix limit instead")


def polarizability(particle: ParticleSpec, omega: float) -> complex:
    """Dipole polarizability alpha = R^3 (eps - 1)/(eps + 2), in m^3."""
    if isinstance(particle.material, PerfectConductor):
        raise NoFinitePermittivity(
            "point-particle polarizability assumes a dielectric response")
    eps = eval_epsilon(particle.material, omega)
    return particle.radius**3 * (eps - 1.0) / (eps + 2.0)


def clausius_mossotti(material: MaterialModel, omega: float) -> complex:
    """(eps - 1)/(eps + 2); alpha / R^3, or (4 pi / 3) alpha / V."""
    if isinstance(material, PerfectConductor):
        raise NoFinitePermittivity(
            "point-particle polarizability assumes a dielectric response")
    eps = eval_epsilon(material, omega)
    return (eps - 1.0) / (eps + 2.0)


def skin_depth(material: MaterialModel, omega: float) -> float:
    """Field penetration depth delta = c / (omega Im sqrt(eps)), in m.

    Uses the principal square root, which has a non-negative imaginary part
    for passive materials.
    """
    eps = eval_epsilon(material, omega)
    im_n = cmath.sqrt(eps).imag
    if im_n <= 0.0:
        raise ValueError("material is non-absorbing at this frequency")
    return C0 / (omega * im_n)


def thermal_wavelength(temperature: float) -> float:
    """Thermal wavelength hbar c / (k_B T), in m."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    return HBAR * C0 / (KB * temperature)


def material_from_config(spec) -> MaterialModel:
    """Build a material from a preset name or an explicit parameter mapping.

    Accepts ``"sic"``, ``"gold"``, ``"pec"``, ``"vacuum"``, or a dict such as
    ``{"model": "lorentz", "eps_inf": ..., "omega_lo": ..., "omega_to": ...,
    "gamma": ..., "mu": 1.0}`` / ``{"model": "drude", "omega_p": ...,
    "omega_tau": ...}``.
    """
    if isinstance(spec, str):
        key = spec.strip().lower()
        if key not in PRESETS:
            raise ValueError(f"unknown material preset {spec!r}; "
                             f"choose from {sorted(PRESETS)}")
        return PRESETS[key]
    if isinstance(spec, MaterialModel):
        return spec
    if not isinstance(spec, dict):
        raise ValueError(f"cannot interpret material spec {spec!r}")
    params = dict(spec)
    model = params.pop("model", None)
    if model == "lorentz":
        return LorentzOscillator(**params)
    if model == "drude":
        return Drude(**params)
    if model == "pec":
        return PerfectConductor(**params)
    if model == "vacuum":
        return Vacuum(**params)
    raise ValueError(f"unknown material model {model!r}")


def material_key(material: MaterialModel) -> tuple:
    """Hashable fingerprint used for caching keyed on the material."""
    if isinstance(material, LorentzOscillator):
        return ("lorentz", material.eps_inf, material.omega_lo,
                material.omega_to, material.gamma, material.mu)
    if isinstance(material, Drude):
        return ("drude", material.omega_p, material.omega_tau, material.mu)
    if isinstance(material, PerfectConductor):
        return ("pec", material.mu)
    return ("vacuum", material.mu)
