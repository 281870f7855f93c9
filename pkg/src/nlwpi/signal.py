"""Numerical evaluation of pathway terms and signal components.

A pathway term is evaluated by building its ket and bra independently:
starting from the vibrational ground state, alternate free evolution with
impulsive kicks (or finite-pulse integrals), insert the term's site
projectors at the points dictated by the family's label schedule, and close
with the bra-ket overlap at the detection time.  Components are sums over
the twelve families of a phase signature; the -- and -+ components are the
complex conjugates of ++ and +- and are never re-enumerated.

Impulsive mode treats the four excitation pulses as delta kicks: a pair of
same-side interactions at exactly coincident center times picks up the
ordered-integral factor 1/2, and an operator order that contradicts the
pulse order gives zero.  The control pulse keeps its finite envelope in both
modes (pre-resonance is meaningless for a delta pulse).
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass, field, replace

import numpy as np

from .model import (DimerModel, PulseTrain, delay_train,
                    validate_pre_resonance)
from . import pathways
from .pathways import (OverlapFamily, PathwayTerm, conjugate_signature,
                       expand, families_for_signature, label_schedule,
                       pump_probe_families)
from .propagation import (Detection, EffectiveRamanOperator, FieldStep,
                          apply_control, control_steps, evolve,
                          finite_cluster, ground_packet, kick, overlap,
                          raman_operator)

REALNESS_TOL = 1e-12


class SignalError(ValueError):
    """Unsupported pulse configuration for the requested evaluation."""


class InvariantViolation(RuntimeError):
    """A numeric invariant (conjugation, realness, completeness) failed."""


_raman_cache = weakref.WeakKeyDictionary()


def _raman(model: DimerModel, pulse) -> EffectiveRamanOperator:
    cache = _raman_cache.setdefault(model, {})
    if pulse not in cache:
        validate_pre_resonance(model, pulse)
        cache[pulse] = raman_operator(model, pulse)
    return cache[pulse]


# ---------------------------------------------------------------------------
# one side of a term
# ---------------------------------------------------------------------------

def _anchor_sites(schedule, labels, side):
    pre, post = {}, {}
    raman_site = None
    final_exit = None
    if labels is not None:
        for a in schedule.by_side(side):
            site = labels[a.slot]
            if a.kind == "exit":
                pre[a.op_index] = site
            elif a.kind == "entry":
                post[a.op_index] = site
            elif a.kind == "raman":
                raman_site = site
            elif a.kind == "final_exit":
                final_exit = site
    return pre, post, raman_site, final_exit


def _side_impulsive(model, train, ops, schedule, labels, side, t0, t_det):
    pre, post, raman_site, final_exit = _anchor_sites(schedule, labels, side)
    pkt = ground_packet(model, t0)
    prev_t = None
    run = 1
    for i, op in enumerate(ops):
        spec = train[op.pulse]
        t_op = spec.center_time
        if prev_t is not None:
            if t_op < prev_t - 1e-12:
                return None    # impulsive reversed pair at separated times
            if abs(t_op - prev_t) <= 1e-12:
                if op.direction == 0 or ops[i - 1].direction == 0:
                    raise SignalError("control pulse coincident with another "
                                      "interaction is not supported impulsively")
                run += 1
                if run > 2:
                    raise SignalError("three or more coincident same-side "
                                      "interactions are not supported impulsively")
                pkt = pkt.scaled(0.5)
            else:
                run = 1
        pkt = evolve(model, pkt, t_op - pkt.time)
        if op.direction == 0:
            pkt = apply_control(model, pkt, _raman(model, spec), site=raman_site)
        else:
            pkt = kick(model, pkt, spec, op.direction, pre.get(i), post.get(i))
        prev_t = t_op
    return _close_side(model, train, schedule, pkt, final_exit, t_det)


def _side_finite(model, train, ops, schedule, labels, side, t0, t_det):
    pre, post, raman_site, final_exit = _anchor_sites(schedule, labels, side)
    steps = []
    for i, op in enumerate(ops):
        spec = train[op.pulse]
        if op.direction == 0:
            validate_pre_resonance(model, spec)
            steps.extend(control_steps(spec, raman_site))
        else:
            steps.append(FieldStep(pulse=spec, direction=op.direction,
                                   pre_site=pre.get(i), post_site=post.get(i)))
    # ordered support check and clustering by window overlap
    clusters = []
    for s in steps:
        if clusters:
            prev = clusters[-1][-1]
            if prev.window[0] >= s.window[1]:
                return None    # time ordering has no support (reversed pair)
            if s.window[0] < max(p.window[1] for p in clusters[-1]):
                clusters[-1].append(s)
                continue
        clusters.append([s])
    pkt = ground_packet(model, t0)
    for cluster in clusters:
        pkt = finite_cluster(model, pkt, cluster)
    return _close_side(model, train, schedule, pkt, final_exit, t_det)


def _close_side(model, train, schedule, pkt, final_exit, t_det):
    if final_exit is not None:
        t_last = train[schedule.last_pulse].center_time
        if t_last > pkt.time:
            pkt = evolve(model, pkt, t_last - pkt.time)
        pkt = replace(pkt, coefficients=model.project_site(
            pkt.coefficients, final_exit))
    return evolve(model, pkt, t_det - pkt.time)


def _start_time(train, mode):
    if mode == "finite":
        from .propagation import window_half_width
        return min(p.center_time - window_half_width(p)
                   for p in train.pulses.values())
    return min(p.center_time for p in train.pulses.values())


def _term_value(model, train, family, labels, mode, detection):
    schedule = label_schedule(family)
    t0 = _start_time(train, mode)
    t_det = train.detection_time()
    build = _side_impulsive if mode == "impulsive" else _side_finite
    ket = build(model, train, family.ket_ops, schedule, labels, "ket", t0, t_det)
    if ket is None:
        return 0.0 + 0.0j
    bra = build(model, train, family.bra_ops, schedule, labels, "bra", t0, t_det)
    if bra is None:
        return 0.0 + 0.0j
    return overlap(bra, ket, model, detection)


def term_amplitude(model: DimerModel, train: PulseTrain, term: PathwayTerm,
                   mode: str = "impulsive", detection: Detection = None) -> complex:
    """Complex amplitude of one pathway term."""
    if mode not in ("impulsive", "finite"):
        raise SignalError(f"unknown mode {mode!r}")
    return _term_value(model, train, term.family, term.labels, mode, detection)


def family_amplitude(model, train, family: OverlapFamily, mode="impulsive",
                     detection=None, include_anomalous=False) -> complex:
    """Sum of all expanded pathway terms of one family."""
    return sum(term_amplitude(model, train, t, mode, detection)
               for t in expand(family, include_anomalous=include_anomalous))


def family_amplitude_unprojected(model, train, family: OverlapFamily,
                                 mode="impulsive", detection=None) -> complex:
    """The family amplitude with every site projector replaced by identity
    (the control applies its site-summed operator).  Oracle for the
    completeness of the primed/unprimed expansion."""
    return _term_value(model, train, family, None, mode, detection)


# ---------------------------------------------------------------------------
# delay grids and components
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DelayGrid:
    """Interferogram coordinates: (t_BA, t_DC) scan at fixed t_CA."""

    t_ba: tuple
    t_dc: tuple
    t_ca: float

    def __post_init__(self):
        for name, values in (("t_ba", self.t_ba), ("t_dc", self.t_dc)):
            arr = np.asarray(values, dtype=float)
            if arr.size == 0:
                raise SignalError(f"{name} grid is empty")
            if np.any(arr < 0):
                raise SignalError(f"{name} delays must be >= 0")
            if arr.size > 1 and np.any(np.diff(arr) <= 0):
                raise SignalError(f"{name} grid must be strictly increasing")
        if max(self.t_ba) > self.t_ca:
            raise SignalError("t_BA may not exceed t_CA (pulse ordering)")

    @property
    def shape(self):
        return (len(self.t_ba), len(self.t_dc))


@dataclass(frozen=True)
class TrainTemplate:
    """Pulse settings shared across a delay scan; pulse A sits at t = 0."""

    amplitudes: dict = field(default_factory=dict)
    carriers: dict = field(default_factory=dict)
    phases: dict = field(default_factory=dict)
    fwhm: float = 6.0
    p_carrier: float = 9000.0
    p_fwhm: float = 25.0
    p_center_offset: float = -150.0

    def train(self, t_ba: float, t_ca: float, t_dc: float) -> PulseTrain:
        return delay_train(t_ba, t_ca, t_dc,
                           amplitudes=self.amplitudes, carriers=self.carriers,
                           fwhm=self.fwhm, p_center_offset=self.p_center_offset,
                           p_carrier=self.p_carrier, p_fwhm=self.p_fwhm,
                           phases=self.phases)


@dataclass(frozen=True)
class SignalComponent:
    """One phase-signature component on a delay grid, with its per-family
    breakdown retained."""

    signature: str
    grid: DelayGrid
    values: np.ndarray                 # complex, shape grid.shape
    per_family: dict                   # family token -> complex ndarray

    def conjugate(self) -> "SignalComponent":
        return SignalComponent(
            signature=conjugate_signature(self.signature),
            grid=self.grid,
            values=np.conj(self.values),
            per_family={k: np.conj(v) for k, v in self.per_family.items()})


def _family_token(family: OverlapFamily) -> str:
    return f"<{family.bra}|{family.ket}>"


def component(model: DimerModel, grid: DelayGrid, signature: str,
              template: TrainTemplate, *, mode: str = "impulsive",
              detection: Detection = None, include_anomalous: bool = False,
              n_jobs: int = 1) -> SignalComponent:
    """Evaluate one directly enumerated component (++ or +-) on a grid."""
    families = families_for_signature(signature)
    points = [(i, j, tb, td) for i, tb in enumerate(grid.t_ba)
              for j, td in enumerate(grid.t_dc)]

    def eval_point(tb, td):
        train = template.train(tb, grid.t_ca, td)
        return [family_amplitude(model, train, fam, mode, detection,
                                 include_anomalous) for fam in families]

    if n_jobs > 1:
        from joblib import Parallel, delayed
        rows = Parallel(n_jobs=n_jobs)(
            delayed(eval_point)(tb, td) for (_, _, tb, td) in points)
    else:
        rows = [eval_point(tb, td) for (_, _, tb, td) in points]

    per_family = {_family_token(f): np.zeros(grid.shape, dtype=complex)
                  for f in families}
    for (i, j, _, _), row in zip(points, rows):
        for fam, val in zip(families, row):
            per_family[_family_token(fam)][i, j] = val
    values = np.sum(list(per_family.values()), axis=0)
    return SignalComponent(signature=signature, grid=grid, values=values,
                           per_family=per_family)


def components(model, grid, template, *, mode="impulsive", detection=None,
               include_anomalous=False, n_jobs=1) -> dict:
    """All four components; -- and -+ filled in by conjugation."""
    out = {}
    for sig in ("++", "+-"):
        out[sig] = component(model, grid, sig, template, mode=mode,
                             detection=detection,
                             include_anomalous=include_anomalous, n_jobs=n_jobs)
    out["--"] = out["++"].conjugate()
    out["-+"] = out["+-"].conjugate()
    return out


def assemble(phi_ba: float, phi_dc: float, comps: dict) -> np.ndarray:
    """Total interferometry signal for one intra-pair phase setting.

    S = e^{i(phi_BA+phi_DC)} S^{++} + e^{i(phi_BA-phi_DC)} S^{+-}
      + e^{i(-phi_BA+phi_DC)} S^{-+} + e^{-i(phi_BA+phi_DC)} S^{--}

    The imaginary residue is checked against REALNESS_TOL and discarded.
    """
    for a, b in (("++", "--"), ("+-", "-+")):
        if not np.allclose(comps[b].values, np.conj(comps[a].values),
                           rtol=0, atol=0):
            raise InvariantViolation(
                f"components {a}/{b} are not conjugation-consistent")
    total = (np.exp(1j * (phi_ba + phi_dc)) * comps["++"].values
             + np.exp(1j * (phi_ba - phi_dc)) * comps["+-"].values
             + np.exp(1j * (-phi_ba + phi_dc)) * comps["-+"].values
             + np.exp(-1j * (phi_ba + phi_dc)) * comps["--"].values)
    scale = np.max(np.abs(total))
    if scale > 0 and np.max(np.abs(total.imag)) > REALNESS_TOL * scale:
        raise InvariantViolation(
            "assembled signal has imaginary residue "
            f"{np.max(np.abs(total.imag)) / scale:.2e} (conjugation broken)")
    return total.real


PHASE_CYCLE = tuple(k * np.pi / 2 for k in range(4))


def components_from_phase_cycle(assembled: dict) -> dict:
    """Invert :func:`assemble` from a 4x4 grid of phase settings.

    `assembled` maps (phi_ba, phi_dc) on PHASE_CYCLE x PHASE_CYCLE to real
    arrays; returns the four complex components by discrete Fourier
    transform over the phase grid.
    """
    out = {}
    for sig, (sa, sb) in {"++": (1, 1), "+-": (1, -1),
                          "-+": (-1, 1), "--": (-1, -1)}.items():
        acc = None
        for pa in PHASE_CYCLE:
            for pb in PHASE_CYCLE:
                w = np.exp(-1j * (sa * pa + sb * pb))
                term = w * np.asarray(assembled[(pa, pb)], dtype=complex)
                acc = term if acc is None else acc + term
        out[sig] = acc / 16.0
    return out


# ---------------------------------------------------------------------------
# pump-probe limit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PumpProbeSignal:
    """Transient-absorption decomposition over the pump-probe delay."""

    t_ca: tuple
    gsb: np.ndarray
    esa: np.ndarray
    se: np.ndarray
    per_family: dict      # family token -> complex array over t_ca

    @property
    def total(self) -> np.ndarray:
        return self.gsb + self.esa + self.se


def _check_pump_probe_train(train: PulseTrain):
    if abs(train.t_ba) > 1e-12 or abs(train.t_dc) > 1e-12:
        raise SignalError("pump-probe evaluation requires t_BA = t_DC = 0 "
                          "(coincident pump and probe pairs)")
    if train.t_ca <= 0:
        raise SignalError("pump-probe delay t_CA must be positive")


def pump_probe(model: DimerModel, t_ca_values, template: TrainTemplate, *,
               mode: str = "impulsive", detection: Detection = None,
               n_jobs: int = 1) -> PumpProbeSignal:
    """Pump-probe signal: 8 Re of each component family pair.

    GSB from <C|DBAPP> + <CPP|DBA>, ESA from <B|CDAPP> + <BPP|CDA>,
    SE from <B|DCAPP> + <BPP|DCA>, all in the +- component, with the
    coincident-pair lock patterns applied.
    """
    classes = pump_probe_families()
    t_ca_values = tuple(float(t) for t in t_ca_values)

    def eval_point(t_ca):
        train = template.train(0.0, t_ca, 0.0)
        _check_pump_probe_train(train)
        vals = {}
        for cls, fams in classes.items():
            vals[cls] = [family_amplitude(model, train, fam, mode, detection)
                         for fam in fams]
        return vals

    if n_jobs > 1:
        from joblib import Parallel, delayed
        rows = Parallel(n_jobs=n_jobs)(
            delayed(eval_point)(t) for t in t_ca_values)
    else:
        rows = [eval_point(t) for t in t_ca_values]

    n = len(t_ca_values)
    per_family = {}
    sums = {cls: np.zeros(n, dtype=complex) for cls in classes}
    for k, vals in enumerate(rows):
        for cls, fams in classes.items():
            for fam, v in zip(classes[cls], vals[cls]):
                per_family.setdefault(_family_token(fam),
                                      np.zeros(n, dtype=complex))[k] = v
            sums[cls][k] = sum(vals[cls])
    return PumpProbeSignal(t_ca=t_ca_values,
                           gsb=8.0 * sums["GSB"].real,
                           esa=8.0 * sums["ESA"].real,
                           se=8.0 * sums["SE"].real,
                           per_family=per_family)


# ---------------------------------------------------------------------------
# direct evaluation of conjugate components (validation only)
# ---------------------------------------------------------------------------

def _component_direct(model, grid, signature, template, *, mode="impulsive",
                      detection=None) -> np.ndarray:
    """Evaluate any signature by direct enumeration, including -- and -+
    through bra/ket exchange.  Used to validate the conjugation relations."""
    families = pathways._swapped_families(signature)
    values = np.zeros(grid.shape, dtype=complex)
    for i, tb in enumerate(grid.t_ba):
        for j, td in enumerate(grid.t_dc):
            train = template.train(tb, grid.t_ca, td)
            values[i, j] = sum(family_amplitude(model, train, f, mode, detection)
                               for f in families)
    return values
