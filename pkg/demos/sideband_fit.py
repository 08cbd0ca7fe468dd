"""Recover a mode frequency and Rabi rate from a simulated sideband scan.

    python3 demos/sideband_fit.py
"""

import math

import numpy as np

from amfm.spectroscopy import fit_sideband, simulate_scan

khz = 2 * math.pi * 1e3
centre, rabi = 2940 * khz, 5 * khz
scan = simulate_scan(centre, rabi, centre + np.linspace(-30, 30, 61) * khz, 40e-6, seed=7)
fit = fit_sideband(scan)
print(f"centre {fit.omega_p / khz:.3f} +- {fit.sigma_omega_p / khz:.3f} kHz (true 2940)")
print(f"Rabi   {fit.rabi / khz:.4f} +- {fit.sigma_rabi / khz:.4f} kHz (true 5)")
