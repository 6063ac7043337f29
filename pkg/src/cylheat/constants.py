"""Physical constants (CODATA 2018), pinned so golden values stay bit-stable.

scipy.constants carries the same numbers; they are spelled out here so the
values used by every formula in the package are visible in one table.
"""

HBAR = 1.054571817e-34  # J s
KB = 1.380649e-23       # J / K
C0 = 299792458.0        # m / s

CONSTANTS_TABLE = {
    "hbar_J_s": HBAR,
    "k_B_J_per_K": KB,
    "c_m_per_s": C0,
}
