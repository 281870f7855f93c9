"""Unit conventions and conversion constants.

All energies are wavenumbers (cm^-1), all times femtoseconds (fs).  The
single conversion that matters is

    omega[rad/fs] = 2*pi*c[cm/fs] * E[cm^-1]  =  E[cm^-1] / HBAR_CM_FS

so ``HBAR_CM_FS`` plays the role of hbar in mixed cm^-1/fs units.  Every
phase accumulated in a propagator goes through :func:`phase_rate` to keep
the convention in one place.
"""

import numpy as np

C_CM_FS = 2.99792458e-5          # speed of light [cm/fs]
TWO_PI_C = 2.0 * np.pi * C_CM_FS  # [rad/fs per cm^-1]
HBAR_CM_FS = 1.0 / TWO_PI_C       # hbar [cm^-1 * fs] ~ 5308.84


def phase_rate(energy_cm: float) -> float:
    """Angular frequency (rad/fs) of a level at `energy_cm` (cm^-1)."""
    return energy_cm / HBAR_CM_FS


def gaussian_sigma(fwhm_fs: float) -> float:
    """Standard deviation of a Gaussian with the given intensity FWHM."""
    return fwhm_fs / (2.0 * np.sqrt(2.0 * np.log(2.0)))


def bandwidth_cm(fwhm_fs: float) -> float:
    """Spectral standard deviation (cm^-1) of a Gaussian pulse envelope."""
    return HBAR_CM_FS / gaussian_sigma(fwhm_fs)
