"""Vibronic energy-transfer dimer: Hamiltonian blocks, dipole maps, pulses.

The dimer is two two-level monomers, each with one harmonic mode, linearly
displaced on its own excited surface (Condon dipoles, constant electronic
coupling J between the two one-exciton site states).  Electronic manifolds:

    0  ground            (both monomers down)          dim = nvib^2
    1  one-exciton       (site 1 or site 2 excited)    dim = 2*nvib^2
    2  two-exciton       (both excited)                dim = nvib^2

Site energies are *vertical* transition energies from the ground-surface
minimum.  Within the one-exciton block the basis is ordered site-major:
index = site*nvib^2 + vib, with vib = n1*nvib + n2.

Site labels in pathway expansions: "unprimed" = site 1, "primed" = site 2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np

from .units import HBAR_CM_FS, bandwidth_cm, gaussian_sigma

GROUND, ONE_EXCITON, TWO_EXCITON = 0, 1, 2
MANIFOLD_NAMES = {GROUND: "ground", ONE_EXCITON: "one_exciton", TWO_EXCITON: "two_exciton"}

SITE_UNPRIMED = 0   # site 1
SITE_PRIMED = 1     # site 2


class PulseLabel(str, Enum):
    A = "A"
    B = "B"
    C = "C"
    D = "D"
    P = "P"


class ModelError(ValueError):
    """Invalid model or pulse parameters."""


@dataclass(frozen=True)
class DimerParams:
    """Static parameters of the dimer (energies in cm^-1, dimensionless
    displacements and dipole weights)."""

    site_energy_1: float = 12500.0
    site_energy_2: float = 12350.0
    coupling_j: float = 100.0
    mode_freq_1: float = 200.0
    mode_freq_2: float = 200.0
    displacement_1: float = 1.0
    displacement_2: float = 1.0
    biexciton_shift: float = 0.0
    dipole_1: float = 1.0
    dipole_2: float = 1.0
    n_vib_per_mode: int = 8

    def __post_init__(self):
        vals = [self.site_energy_1, self.site_energy_2, self.coupling_j,
                self.mode_freq_1, self.mode_freq_2, self.displacement_1,
                self.displacement_2, self.biexciton_shift,
                self.dipole_1, self.dipole_2]
        if not all(np.isfinite(v) for v in vals):
            raise ModelError("non-finite dimer parameter")
        if self.mode_freq_1 <= 0 or self.mode_freq_2 <= 0:
            raise ModelError("mode frequencies must be positive")
        if self.n_vib_per_mode < 2:
            raise ModelError("n_vib_per_mode must be >= 2")


@dataclass(frozen=True)
class PulseSpec:
    """One laser pulse: Gaussian envelope, carrier in the rotating frame.

    ``field_amplitude`` is the dimensionless integrated interaction
    strength: with a unit-area envelope g(t), the first-order kick operator
    is -(i/2)*field_amplitude*mu in the impulsive limit.  The control pulse
    P acts only at second order (Raman), quadratic in its amplitude.
    """

    label: PulseLabel
    center_time: float          # fs
    carrier_freq: float         # cm^-1
    envelope_fwhm: float        # fs
    field_amplitude: float = 1.0
    phase: float = 0.0          # rad

    def __post_init__(self):
        if not np.isfinite(self.center_time):
            raise ModelError(f"pulse {self.label}: non-finite center time")
        if self.envelope_fwhm <= 0:
            raise ModelError(f"pulse {self.label}: envelope_fwhm must be > 0")

    @property
    def sigma(self) -> float:
        return gaussian_sigma(self.envelope_fwhm)

    def envelope(self, t):
        """Unit-area Gaussian envelope g(t) [1/fs]."""
        s = self.sigma
        return np.exp(-0.5 * ((t - self.center_time) / s) ** 2) / (s * np.sqrt(2.0 * np.pi))


@dataclass(frozen=True)
class PulseTrain:
    """The five pulses P, A, B, C, D with derived inter-pulse delays."""

    pulses: dict = field(default_factory=dict)   # PulseLabel -> PulseSpec

    @classmethod
    def build(cls, p, a, b, c, d) -> "PulseTrain":
        train = cls(pulses={PulseLabel.P: p, PulseLabel.A: a, PulseLabel.B: b,
                            PulseLabel.C: c, PulseLabel.D: d})
        train.validate()
        return train

    def __getitem__(self, label) -> PulseSpec:
        return self.pulses[PulseLabel(label)]

    def validate(self):
        order = [PulseLabel.P, PulseLabel.A, PulseLabel.B, PulseLabel.C, PulseLabel.D]
        times = [self.pulses[l].center_time for l in order]
        if any(t2 < t1 for t1, t2 in zip(times, times[1:])):
            raise ModelError("pulse centers must be ordered t_P <= t_A <= t_B <= t_C <= t_D")
        if self.t_ca < 0:
            raise ModelError("t_CA must be >= 0")

    @property
    def t_ba(self) -> float:
        return self[PulseLabel.B].center_time - self[PulseLabel.A].center_time

    @property
    def t_ca(self) -> float:
        return self[PulseLabel.C].center_time - self[PulseLabel.A].center_time

    @property
    def t_dc(self) -> float:
        return self[PulseLabel.D].center_time - self[PulseLabel.C].center_time

    @property
    def phi_ba(self) -> float:
        return self[PulseLabel.B].phase - self[PulseLabel.A].phase

    @property
    def phi_dc(self) -> float:
        return self[PulseLabel.D].phase - self[PulseLabel.C].phase

    def with_phases(self, phi_a=None, phi_b=None, phi_c=None, phi_d=None) -> "PulseTrain":
        """Copy of the train with the given pulse phases replaced."""
        from dataclasses import replace
        new = dict(self.pulses)
        for lab, phi in [(PulseLabel.A, phi_a), (PulseLabel.B, phi_b),
                         (PulseLabel.C, phi_c), (PulseLabel.D, phi_d)]:
            if phi is not None:
                new[lab] = replace(new[lab], phase=phi)
        return PulseTrain(pulses=new)

    def with_amplitudes(self, scale=None, **per_label) -> "PulseTrain":
        """Copy with field amplitudes rescaled (`scale` applies to all)."""
        from dataclasses import replace
        new = dict(self.pulses)
        for lab, spec in new.items():
            amp = spec.field_amplitude
            if scale is not None:
                amp = amp * scale
            if lab.value in per_label:
                amp = per_label[lab.value]
            new[lab] = replace(spec, field_amplitude=amp)
        return PulseTrain(pulses=new)

    @property
    def max_fwhm(self) -> float:
        return max(p.envelope_fwhm for p in self.pulses.values())

    def detection_time(self) -> float:
        """Time at which overlaps are evaluated: all envelopes have died."""
        return self[PulseLabel.D].center_time + 5.0 * self.max_fwhm


def delay_train(t_ba, t_ca, t_dc, *, amplitudes=None, carriers=None,
                fwhm=6.0, p_center_offset=-150.0, p_carrier=9000.0,
                p_fwhm=25.0, phases=None) -> PulseTrain:
    """Convenience constructor: pulse A at t = 0, delays in fs.

    `amplitudes`/`phases` map label -> value; carriers default to a
    near-resonant value for A..D and a pre-resonant one for P.
    """
    if t_ba < 0 or t_dc < 0 or t_ca < t_ba:
        raise ModelError("need t_BA >= 0, t_DC >= 0 and t_CA >= t_BA")
    amplitudes = amplitudes or {}
    carriers = carriers or {}
    phases = phases or {}
    centers = {"A": 0.0, "B": t_ba, "C": t_ca, "D": t_ca + t_dc,
               "P": p_center_offset}
    specs = {}
    for lab in "PABCD":
        specs[lab] = PulseSpec(
            label=PulseLabel(lab),
            center_time=centers[lab],
            carrier_freq=carriers.get(lab, p_carrier if lab == "P" else 12400.0),
            envelope_fwhm=p_fwhm if lab == "P" else fwhm,
            field_amplitude=amplitudes.get(lab, 1.0),
            phase=phases.get(lab, 0.0),
        )
    return PulseTrain.build(specs["P"], specs["A"], specs["B"], specs["C"], specs["D"])


# ---------------------------------------------------------------------------
# Hamiltonian blocks
# ---------------------------------------------------------------------------

def _mode_ops(n):
    """Number operator and dimensionless coordinate sqrt(1/2)(b+b^+)."""
    num = np.diag(np.arange(n, dtype=float))
    b = np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1)
    x = (b + b.T) / np.sqrt(2.0)
    return num, x


@dataclass
class Eigensystem:
    energies: np.ndarray   # [cm^-1]
    vectors: np.ndarray    # columns are eigenvectors in the site basis

    def evolve(self, coeffs: np.ndarray, dt_fs: float) -> np.ndarray:
        """exp(-i H dt / hbar) applied via the cached eigensystem."""
        if dt_fs == 0.0:
            return coeffs.copy()
        a = self.vectors.conj().T @ coeffs
        a = a * np.exp(-1j * self.energies * dt_fs / HBAR_CM_FS)
        return self.vectors @ a


class DimerModel:
    """Hamiltonian blocks, dipole maps and projectors for one parameter set.

    Immutable after construction; all matrices and eigensystems are cached
    and may be shared across workers.
    """

    def __init__(self, params: DimerParams):
        self.params = params
        n = params.n_vib_per_mode
        self.n_vib = n
        self.dim_vib = n * n
        self.dims = {GROUND: self.dim_vib, ONE_EXCITON: 2 * self.dim_vib,
                     TWO_EXCITON: self.dim_vib}

        num, x = _mode_ops(n)
        eye = np.eye(n)
        num1 = np.kron(num, eye)
        num2 = np.kron(eye, num)
        x1 = np.kron(x, eye)
        x2 = np.kron(eye, x)
        p = params

        dv = self.dim_vib
        ident = np.eye(dv)
        h_vib = p.mode_freq_1 * num1 + p.mode_freq_2 * num2
        self.h_ground = h_vib.copy()

        h_site1 = p.site_energy_1 * ident + h_vib - p.mode_freq_1 * p.displacement_1 * x1
        h_site2 = p.site_energy_2 * ident + h_vib - p.mode_freq_2 * p.displacement_2 * x2
        h_one = np.zeros((2 * dv, 2 * dv))
        h_one[:dv, :dv] = h_site1
        h_one[dv:, dv:] = h_site2
        h_one[:dv, dv:] = p.coupling_j * ident
        h_one[dv:, :dv] = p.coupling_j * ident
        self.h_one_exciton = h_one

        self.h_two_exciton = (
            (p.site_energy_1 + p.site_energy_2 + p.biexciton_shift) * ident
            + h_vib
            - p.mode_freq_1 * p.displacement_1 * x1
            - p.mode_freq_2 * p.displacement_2 * x2)

        # site-diagonal one-exciton blocks, used by the J-free Raman kernel
        self._h_site = {SITE_UNPRIMED: h_site1, SITE_PRIMED: h_site2}

        self._eigs = {}
        self._dipole_mats = {}

    def block(self, manifold: int) -> np.ndarray:
        return {GROUND: self.h_ground, ONE_EXCITON: self.h_one_exciton,
                TWO_EXCITON: self.h_two_exciton}[manifold]

    def eig(self, manifold: int) -> Eigensystem:
        if manifold not in self._eigs:
            w, v = np.linalg.eigh(self.block(manifold))
            self._eigs[manifold] = Eigensystem(energies=w, vectors=v)
        return self._eigs[manifold]

    def site_eig(self, site: int) -> Eigensystem:
        """Eigensystem of one uncoupled (J-free) one-exciton site block."""
        key = ("site", site)
        if key not in self._eigs:
            w, v = np.linalg.eigh(self._h_site[site])
            self._eigs[key] = Eigensystem(energies=w, vectors=v)
        return self._eigs[key]

    @cached_property
    def ground_state(self) -> np.ndarray:
        """Vibrational ground state |0,0> of the ground manifold."""
        vec = np.zeros(self.dim_vib, dtype=complex)
        vec[0] = 1.0
        return vec

    def lowest_one_exciton_energy(self) -> float:
        return float(self.eig(ONE_EXCITON).energies[0])

    # -- site projectors ----------------------------------------------------

    def site_projector_diag(self, site: int) -> np.ndarray:
        """Diagonal of P_site on the one-exciton block (site basis)."""
        dv = self.dim_vib
        d = np.zeros(2 * dv)
        d[site * dv:(site + 1) * dv] = 1.0
        return d

    def site_projector(self, site: int) -> np.ndarray:
        return np.diag(self.site_projector_diag(site))

    def project_site(self, coeffs: np.ndarray, site) -> np.ndarray:
        """Apply a one-exciton site projector (site may be None = identity)."""
        if site is None:
            return coeffs
        out = np.zeros_like(coeffs)
        dv = self.dim_vib
        sl = slice(site * dv, (site + 1) * dv)
        out[sl] = coeffs[sl]
        return out

    # -- dipole maps ---------------------------------------------------------

    def dipole_up(self, coeffs: np.ndarray, manifold: int, site=None) -> np.ndarray:
        """Raising part of the dipole operator.

        site=None applies the total mu^+ = mu_1^+ + mu_2^+ with
        mu_s^+ = d_s (|s><g| + |f><sbar|), Condon (identity on vibrations).
        """
        p = self.params
        dv = self.dim_vib
        if manifold == GROUND:
            out = np.zeros(2 * dv, dtype=complex)
            if site in (None, SITE_UNPRIMED):
                out[:dv] += p.dipole_1 * coeffs
            if site in (None, SITE_PRIMED):
                out[dv:] += p.dipole_2 * coeffs
            return out
        if manifold == ONE_EXCITON:
            out = np.zeros(dv, dtype=complex)
            if site in (None, SITE_UNPRIMED):
                out += p.dipole_1 * coeffs[dv:]    # raise site 1 when at site 2
            if site in (None, SITE_PRIMED):
                out += p.dipole_2 * coeffs[:dv]    # raise site 2 when at site 1
            return out
        raise ModelError("cannot raise from the two-exciton manifold")

    def dipole_matrix(self, direction: int, manifold: int, site=None) -> np.ndarray:
        """Dense matrix of the raising/lowering map out of `manifold`."""
        key = (direction, manifold, site)
        if key not in self._dipole_mats:
            p = self.params
            dv = self.dim_vib
            ident = np.eye(dv)
            if direction == +1 and manifold == GROUND:
                mat = np.zeros((2 * dv, dv))
                if site in (None, SITE_UNPRIMED):
                    mat[:dv] = p.dipole_1 * ident
                if site in (None, SITE_PRIMED):
                    mat[dv:] = p.dipole_2 * ident
            elif direction == +1 and manifold == ONE_EXCITON:
                mat = np.zeros((dv, 2 * dv))
                if site in (None, SITE_UNPRIMED):
                    mat[:, dv:] += p.dipole_1 * ident
                if site in (None, SITE_PRIMED):
                    mat[:, :dv] += p.dipole_2 * ident
            elif direction == -1:
                mat = self.dipole_matrix(+1, manifold - 1, site).T
            else:
                raise ModelError("no dipole map for that manifold/direction")
            self._dipole_mats[key] = mat
        return self._dipole_mats[key]

    def dipole_down(self, coeffs: np.ndarray, manifold: int, site=None) -> np.ndarray:
        """Lowering part, exact adjoint of :meth:`dipole_up`."""
        p = self.params
        dv = self.dim_vib
        if manifold == ONE_EXCITON:
            out = np.zeros(dv, dtype=complex)
            if site in (None, SITE_UNPRIMED):
                out += p.dipole_1 * coeffs[:dv]
            if site in (None, SITE_PRIMED):
                out += p.dipole_2 * coeffs[dv:]
            return out
        if manifold == TWO_EXCITON:
            out = np.zeros(2 * dv, dtype=complex)
            if site in (None, SITE_UNPRIMED):
                out[dv:] += p.dipole_1 * coeffs    # lower site 1, leaving site 2
            if site in (None, SITE_PRIMED):
                out[:dv] += p.dipole_2 * coeffs
            return out
        raise ModelError("cannot lower from the ground manifold")


def validate_pre_resonance(model: DimerModel, pulse: PulseSpec):
    """Require the control carrier to sit at least one envelope bandwidth
    below the lowest one-exciton vibronic transition."""
    detuning = model.lowest_one_exciton_energy() - pulse.carrier_freq
    bw = bandwidth_cm(pulse.envelope_fwhm)
    if detuning < bw:
        raise ModelError(
            f"control pulse not pre-resonant: detuning {detuning:.1f} cm^-1 "
            f"< bandwidth {bw:.1f} cm^-1")
