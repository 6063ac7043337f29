"""Near-field heat radiation and transfer of nanoparticles next to a cylinder."""

__version__ = "0.1.0"

from .constants import C0, HBAR, KB
from .materials import (GOLD, PEC, SIC, VACUUM, CylinderSpec, Drude,
                        LorentzOscillator, MaterialModel, ParticleSpec,
                        PerfectConductor, Vacuum, clausius_mossotti,
                        eval_epsilon, material_from_config, polarizability,
                        skin_depth, thermal_wavelength)
from .scattering import TElements, axial_wavevector_q, tmatrix, tmatrix_pc, tmatrix_signed
from .greens import (ConvergenceReport, CylPoint, GreensTensor, full_green,
                     g0_cartesian, g0_cylindrical, gt_general, gt_parallel,
                     gt_perpendicular, tr_gg_dagger, tr_im_g0_coincident,
                     tr_im_g_coincident, tr_g0g0_dagger)
from .quadrature import (QuadratureSpec, SpectralCurve, integrate_kz,
                         integrate_omega, spectral_curve)
from .observables import (Angular, General, HRResult, HTResult, Parallel,
                          Perpendicular, angular_ratio, heat_radiation,
                          heat_radiation_vacuum, heat_transfer)
