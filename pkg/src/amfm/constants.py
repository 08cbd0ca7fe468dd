"""Physical constants (CODATA 2018) and default experimental parameters.

All values are SI. They are pinned here rather than taken from
``scipy.constants`` so results do not shift when the installed SciPy
moves to a newer CODATA release.
"""

import math

HBAR = 1.054571817e-34  # J s (exact in the 2019 SI)
ELEMENTARY_CHARGE = 1.602176634e-19  # C (exact)
EPSILON_0 = 8.8541878128e-12  # F/m
ATOMIC_MASS_UNIT = 1.66053906660e-27  # kg
ELECTRON_MASS_U = 5.48579909065e-4  # electron mass in atomic mass units

# 171Yb neutral-atom mass (AME2016) minus one electron: the singly charged ion.
YB171_MASS_U = 170.936330208 - ELECTRON_MASS_U
YB171_MASS = YB171_MASS_U * ATOMIC_MASS_UNIT

RAMAN_WAVELENGTH = 355e-9  # m
# Counter-propagating Raman pair: |k1 - k2| = 2 * (2 pi / lambda).
RAMAN_DELTA_K = 4.0 * math.pi / RAMAN_WAVELENGTH

TWO_PI = 2.0 * math.pi
