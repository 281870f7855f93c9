"""Enumeration of the quadrilinear interference pathways.

The interferometry signal is a sum of bra-ket overlap families such as
<B|DCAPP>: the ket carries one interaction each from pulses A, C, D plus the
twice-acting control P (the "PP" token), the bra one interaction from B.
Token strings read right to left in time (operator order), so "CDAPP" means
P..P, A, then D *before* C — a reversed-order term supported only by pulse
overlap.  Each family appears under a phase signature (the joint dependence
on the intra-pair phases phi_BA = phi_B - phi_A and phi_DC = phi_D - phi_C),
and the signature fixes the raising/lowering direction of every interaction
uniquely:

    ket up: e^{-i phi}, ket down: e^{+i phi}; bra contributions conjugate.

A family expands into pathway terms labeled primed/unprimed at five slots:
one site label wherever an interaction enters or leaves the one-exciton
manifold, plus one for the virtual Raman site of PP (always the last slot).
Two slots flanking a one-exciton residence that exists only inside a pulse
overlap are locked (no energy transfer on the pulse timescale); in the
pump-probe limit the coincident pump pair and the coincident probe-time
labels lock as well, shrinking 32-term families to 8 for ground-state
bleach.  Term order follows the canonical listing order throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .model import GROUND, ONE_EXCITON, TWO_EXCITON

SIGNATURES = ("++", "+-", "-+", "--")
DIRECT_SIGNATURES = ("++", "+-")

UNPRIMED, PRIMED = 0, 1

_PULSE_ORDER = {"P": 0.0, "A": 1.0, "B": 2.0, "C": 3.0, "D": 4.0}

#: families of the ++ and +- components, in listing order
_FAMILY_TOKENS = {
    "++": (("B", "DCAPP"), ("B", "CDAPP"), ("BPP", "DCA"), ("BPP", "CDA"),
           ("DCBPP", "A"), ("CDBPP", "A"), ("DCB", "APP"), ("CDB", "APP"),
           ("D", "CBAPP"), ("DPP", "CBA"), ("DABPP", "C"), ("DAB", "CPP")),
    "+-": (("B", "DCAPP"), ("B", "CDAPP"), ("BPP", "DCA"), ("BPP", "CDA"),
           ("DCBPP", "A"), ("CDBPP", "A"), ("DCB", "APP"), ("CDB", "APP"),
           ("C", "DBAPP"), ("CPP", "DBA"), ("CABPP", "D"), ("CAB", "DPP")),
}

#: pump-probe component classes -> family pair (bra, ket), all +-
_PUMP_PROBE_TOKENS = {
    "GSB": (("C", "DBAPP"), ("CPP", "DBA")),
    "ESA": (("B", "CDAPP"), ("BPP", "CDA")),
    "SE": (("B", "DCAPP"), ("BPP", "DCA")),
}

#: the one listing line that violates its family's lock pattern
_ANOMALOUS_TERMS = {("DAB", "CPP", "++"): ((2, (1, 0, 1, 0, 0)),)}


class FamilyError(ValueError):
    """Malformed family token or unsupported signature."""


# ---------------------------------------------------------------------------
# canonical listing orders
# ---------------------------------------------------------------------------

_SUB8 = ("000", "100", "010", "001", "110", "011", "101", "111")
_SUB16 = ("0000",) + tuple("1" + s for s in _SUB8) + tuple("0" + s for s in _SUB8[1:])
_W8 = ("000", "100", "110", "101", "111", "010", "001", "011")
_W4 = ("00", "10", "11", "01")


def _bits(s):
    return tuple(int(c) for c in s)


#: canonical order of fully-free five-slot patterns (32 terms)
ORDER_FREE = tuple(_bits(s + tail) for tail in "01" for s in _SUB16)

#: group-space orders for one and two locked pairs
_ORDER_LOCK1_GROUPS = tuple(_bits(w + tail) for tail in "01" for w in _W8)
_ORDER_LOCK2_GROUPS = tuple(_bits(w + tail) for tail in "01" for w in _W4)


def _patterns_for_groups(groups):
    """Canonical term patterns for the given slot partition (sorted groups)."""
    n_slots = sum(len(g) for g in groups)
    if all(len(g) == 1 for g in groups):
        if n_slots == 5:
            return ORDER_FREE
        if n_slots == 4:  # control stripped
            return tuple(_bits(s) for s in _SUB16)
        raise FamilyError(f"unsupported free slot count {n_slots}")
    sizes = tuple(len(g) for g in groups)
    if sizes == (2, 1, 1, 1):
        group_patterns = _ORDER_LOCK1_GROUPS
    elif sizes == (2, 2, 1):
        group_patterns = _ORDER_LOCK2_GROUPS
    elif sizes == (2, 1, 1):  # control stripped, one locked pair
        group_patterns = tuple(_bits(w) for w in _W8)
    else:
        raise FamilyError(f"unsupported lock structure {sizes}")
    out = []
    for gp in group_patterns:
        pattern = [0] * n_slots
        for value, group in zip(gp, groups):
            for slot in group:
                pattern[slot] = value
        out.append(tuple(pattern))
    return tuple(out)


# ---------------------------------------------------------------------------
# families, interactions, schedules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InteractionToken:
    pulse: str
    multiplicity: int

    def __post_init__(self):
        if (self.multiplicity == 2) != (self.pulse == "P"):
            raise FamilyError("control pulse P always appears as PP, others once")


def parse_sequence(tokens: str):
    """Token string -> pulses in time order ("PP" collapses to one 'P')."""
    seq = []
    i = len(tokens)
    while i > 0:
        if tokens[i - 2:i] == "PP":
            seq.append("P")
            i -= 2
        else:
            if tokens[i - 1] not in "ABCD":
                raise FamilyError(f"bad token string {tokens!r}")
            seq.append(tokens[i - 1])
            i -= 1
    if "P" in seq and seq[0] != "P":
        raise FamilyError("control PP must be the earliest interaction on its side")
    return tuple(seq)


def signature_exponents(signature: str):
    """Sign n_X of phi_X in a term's phase factor, per pulse."""
    if signature not in SIGNATURES:
        raise FamilyError(f"unknown signature {signature!r}")
    s_ba = +1 if signature[0] == "+" else -1
    s_dc = +1 if signature[1] == "+" else -1
    return {"A": -s_ba, "B": +s_ba, "C": -s_dc, "D": +s_dc}


@dataclass(frozen=True)
class Interaction:
    pulse: str
    direction: int        # +1 raise, -1 lower, 0 control (Raman)
    order_key: float      # nominal time-order key (reversed pairs share one)
    manifold_before: int
    manifold_after: int


def _solve_side(seq, side, signature):
    """Assign directions along one side and validate the manifold walk."""
    exps = signature_exponents(signature)
    ops = []
    manifold = GROUND
    for pulse in seq:
        if pulse == "P":
            if manifold != GROUND:
                raise FamilyError("control PP must act on the ground manifold")
            ops.append([pulse, 0, _PULSE_ORDER[pulse], GROUND, GROUND])
            continue
        n = exps[pulse]
        up = (n == -1) if side == "ket" else (n == +1)
        nxt = manifold + (1 if up else -1)
        if nxt < GROUND or nxt > TWO_EXCITON:
            raise FamilyError(
                f"{side} sequence {seq} invalid for signature {signature}")
        ops.append([pulse, +1 if up else -1, _PULSE_ORDER[pulse], manifold, nxt])
        manifold = nxt
    if manifold != ONE_EXCITON:
        raise FamilyError(
            f"{side} sequence {seq} does not end in the one-exciton manifold")
    # reversed adjacent pairs (operator order against pulse order) share a key
    for i in range(len(ops) - 1):
        if ops[i][0] != "P" and ops[i][2] > ops[i + 1][2]:
            mid = 0.5 * (ops[i][2] + ops[i + 1][2])
            ops[i][2] = ops[i + 1][2] = mid
    return tuple(Interaction(*op) for op in ops)


@dataclass(frozen=True)
class OverlapFamily:
    """One bra-ket overlap family under a fixed phase signature."""

    bra: str
    ket: str
    signature: str
    component_class: str = "Generic"
    pump_probe: bool = False
    has_control: bool = True
    listing_index: int = 0

    def __post_init__(self):
        counts = {}
        for seq in (self.bra_sequence, self.ket_sequence):
            for pulse in seq:
                counts[pulse] = counts.get(pulse, 0) + 1
        expected = {"A": 1, "B": 1, "C": 1, "D": 1}
        if self.has_control:
            expected["P"] = 1
        if counts != expected:
            raise FamilyError(f"family <{self.bra}|{self.ket}> must use each "
                              "pulse exactly once (PP once)")

    @property
    def name(self) -> str:
        return f"<{self.bra}|{self.ket}>{self.signature}"

    @property
    def bra_sequence(self):
        return parse_sequence(self.bra)

    @property
    def ket_sequence(self):
        return parse_sequence(self.ket)

    @property
    def ket_ops(self):
        return _solve_side(self.ket_sequence, "ket", self.signature)

    @property
    def bra_ops(self):
        return _solve_side(self.bra_sequence, "bra", self.signature)

    def strip_control(self) -> "OverlapFamily":
        """Control-free variant (bare quadrilinear pathway family)."""
        def strip(tokens):
            return tokens[:-2] if tokens.endswith("PP") else tokens
        return OverlapFamily(strip(self.bra), strip(self.ket), self.signature,
                             self.component_class, self.pump_probe,
                             has_control=False, listing_index=self.listing_index)

    @property
    def schedule(self) -> "LabelSchedule":
        return label_schedule(self)

    @property
    def lock_pattern(self):
        return lock_groups(self)

    @property
    def free_slot_count(self) -> int:
        return sum(1 for g in self.lock_pattern if len(g) == 1)

    def term_count(self, include_anomalous: bool = False) -> int:
        return len(expand(self, include_anomalous=include_anomalous))


@dataclass(frozen=True)
class Anchor:
    """One site-projector insertion point bound to a printed label slot."""

    slot: int
    side: str             # "ket" | "bra"
    op_index: int | None  # index into that side's time-ordered interactions
    kind: str             # "entry" | "exit" | "raman" | "final_exit"


@dataclass(frozen=True)
class LabelSchedule:
    """Where each label slot's projector is inserted during evaluation."""

    anchors: tuple
    last_pulse: str       # pulse whose interaction closes the term
    last_side: str

    def by_side(self, side):
        return tuple(a for a in self.anchors if a.side == side)


@lru_cache(maxsize=None)
def label_schedule(family: OverlapFamily) -> LabelSchedule:
    """Derive the slot -> insertion-point map for one family.

    Real anchors (interaction endpoints touching the one-exciton manifold,
    plus the Raman site of PP) get slots ordered by nominal interaction time,
    ket before bra at ties, with the Raman slot printed last.  The side whose
    interactions finish first receives a trailing projector at the time of
    the globally last interaction, sharing that interaction's slot.
    """
    sides = {"ket": family.ket_ops, "bra": family.bra_ops}
    records = []   # (sort_key, side_rank, op_index, side, op_index, kind)
    raman = None
    for side, ops in sides.items():
        rank = 0 if side == "ket" else 1
        for i, op in enumerate(ops):
            if op.direction == 0:
                if raman is not None:
                    raise FamilyError("more than one control token in a family")
                raman = (side, i)
                continue
            if op.manifold_before == ONE_EXCITON:
                records.append(((op.order_key, rank, i), side, i, "exit"))
            if op.manifold_after == ONE_EXCITON:
                records.append(((op.order_key, rank, i), side, i, "entry"))
    records.sort(key=lambda r: r[0])
    if len(records) != 4:
        raise FamilyError(f"family {family.name} has {len(records)} one-exciton "
                          "anchors, expected 4")
    anchors = [Anchor(slot, side, i, kind)
               for slot, (_, side, i, kind) in enumerate(records)]

    # trailing projector for the side that finishes early
    finals = {}
    for side, ops in sides.items():
        idx = len(ops) - 1
        finals[side] = (ops[idx].order_key, side, idx)
    last_side = max(finals, key=lambda s: finals[s][0])
    early_side = "bra" if last_side == "ket" else "ket"
    if finals[early_side][0] < finals[last_side][0]:
        last_op_index = finals[last_side][2]
        shared = [a for a in anchors
                  if a.side == last_side and a.op_index == last_op_index
                  and a.kind == "entry"]
        if len(shared) != 1:
            raise FamilyError(f"family {family.name}: no final entry anchor")
        anchors.append(Anchor(shared[0].slot, early_side, None, "final_exit"))

    if raman is not None:
        anchors.append(Anchor(4, raman[0], raman[1], "raman"))
    last_ops = sides[last_side]
    return LabelSchedule(anchors=tuple(anchors),
                         last_pulse=last_ops[-1].pulse, last_side=last_side)


@lru_cache(maxsize=None)
def lock_groups(family: OverlapFamily):
    """Slot partition into lock groups, sorted by first slot.

    Always locked: the entry/exit pair flanking a one-exciton residence that
    exists only inside a pulse overlap (reversed-order adjacent pair).  In
    the pump-probe configuration (coincident A,B and coincident C,D) the
    pump pair locks likewise, and the two probe-time labels lock through
    site orthogonality at the closing overlap.
    """
    schedule = label_schedule(family)
    slot_of = {(a.side, a.op_index, a.kind): a.slot for a in schedule.anchors
               if a.kind in ("entry", "exit")}
    n_slots = 5 if family.has_control else 4
    pairs = []

    def coincident(p1, p2):
        if not family.pump_probe:
            return False
        groups = ({"A", "B"}, {"C", "D"})
        return any(p1 in g and p2 in g for g in groups)

    for side, ops in (("ket", family.ket_ops), ("bra", family.bra_ops)):
        for i in range(len(ops) - 1):
            a, b = ops[i], ops[i + 1]
            if a.direction == 0 or b.direction == 0:
                continue
            if a.manifold_after != ONE_EXCITON:
                continue
            reversed_pair = a.order_key == b.order_key
            if reversed_pair or coincident(a.pulse, b.pulse):
                pairs.append((slot_of[(side, i, "entry")],
                              slot_of[(side, i + 1, "exit")]))
    if family.pump_probe:
        # coincident closing interactions on opposite sides
        ket_last, bra_last = family.ket_ops[-1], family.bra_ops[-1]
        if coincident(ket_last.pulse, bra_last.pulse):
            pairs.append((slot_of[("ket", len(family.ket_ops) - 1, "entry")],
                          slot_of[("bra", len(family.bra_ops) - 1, "entry")]))

    grouped = []
    used = set()
    for s in range(n_slots):
        if s in used:
            continue
        group = {s}
        for p in pairs:
            if s in p:
                group.update(p)
        used.update(group)
        grouped.append(tuple(sorted(group)))
    return tuple(sorted(grouped, key=lambda g: g[0]))


@dataclass(frozen=True)
class PathwayTerm:
    """One concrete primed/unprimed label assignment of a family."""

    family: OverlapFamily
    labels: tuple         # 0 = unprimed (site 1), 1 = primed (site 2)
    term_index: int

    @property
    def pattern(self) -> str:
        return "".join("'" if v else "." for v in self.labels)


def expand(family: OverlapFamily, include_anomalous: bool = False):
    """All pathway terms of a family, in canonical listing order."""
    groups = lock_groups(family)
    patterns = list(_patterns_for_groups(groups))
    key = (family.bra, family.ket, family.signature)
    if include_anomalous and not family.pump_probe and family.has_control:
        for index, labels in _ANOMALOUS_TERMS.get(key, ()):
            patterns.insert(index, labels)
    return [PathwayTerm(family=family, labels=p, term_index=i)
            for i, p in enumerate(patterns)]


def families_for_signature(signature: str):
    """The twelve overlap families of a directly enumerated component."""
    if signature not in DIRECT_SIGNATURES:
        raise FamilyError(
            f"component {signature} is served by conjugation, not enumerated")
    return [OverlapFamily(bra, ket, signature, listing_index=i)
            for i, (bra, ket) in enumerate(_FAMILY_TOKENS[signature])]


def pump_probe_families():
    """Component class -> pair of +- families in the pump-probe limit."""
    out = {}
    for cls, pairs in _PUMP_PROBE_TOKENS.items():
        out[cls] = tuple(
            OverlapFamily(bra, ket, "+-", component_class=cls,
                          pump_probe=True, listing_index=i)
            for i, (bra, ket) in enumerate(pairs))
    return out


def conjugate_signature(signature: str) -> str:
    flip = {"+": "-", "-": "+"}
    return "".join(flip[c] for c in signature)


@dataclass(frozen=True)
class ConjugateComponent:
    """Marker: the component equals the complex conjugate of its source."""

    source_signature: str

    @property
    def signature(self) -> str:
        return conjugate_signature(self.source_signature)

    def value(self, source_value):
        import numpy as np
        return np.conj(source_value)


def conjugate_component(signature: str) -> ConjugateComponent:
    """The -- and -+ components are conjugates of ++ and +-."""
    if signature not in DIRECT_SIGNATURES:
        raise FamilyError("conjugate_component starts from ++ or +-")
    return ConjugateComponent(source_signature=signature)


def _swapped_families(signature: str):
    """Directly enumerated families for -- / -+ (validation only)."""
    if signature in DIRECT_SIGNATURES:
        return families_for_signature(signature)
    src = conjugate_signature(signature)
    return [OverlapFamily(ket, bra, signature, listing_index=i)
            for i, (bra, ket) in enumerate(_FAMILY_TOKENS[src])]
