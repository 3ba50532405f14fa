"""Two-level (triangular mesh) decomposition of unitaries and its optical layout.

A unitary U is written as

    U = (E[N,N-1] . E[N,N-2] ... E[2,1] . S)^-1

where each E[i,j] is the identity except for a 2x2 unitary block on modes
``j < i`` and S is a diagonal phase screen. Modes are 1-based throughout
this module. Blocks are stored in (j, i) order, i.e. ``block[0, 0]`` is the
(j, j) entry and ``block[1, 1]`` the (i, i) entry.

The layout encodes basis states in polarization and spatial mode: pairs of
levels share a spatial mode as horizontal/vertical polarization, a wave
plate set acts as an arbitrary 2x2 unitary on one spatial mode, a half-wave
plate at 45 degrees swaps H and V, and a beam displacer shifts every
horizontally polarized component one spatial mode up while leaving vertical
light in place.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .qudit import ATOL_DERIVED, ATOL_INVARIANT, InvariantError, UnitaryChannel, dagger

H, V = "H", "V"


@dataclass(frozen=True, eq=False)
class TwoLevelRotation:
    i: int
    j: int
    block: np.ndarray

    def __post_init__(self):
        b = np.array(self.block, dtype=complex)
        if b.shape != (2, 2):
            raise InvariantError(f"rotation block must be 2x2, got {b.shape}")
        if not self.i > self.j >= 1:
            raise InvariantError(f"need 1 <= j < i, got i={self.i}, j={self.j}")
        if np.abs(dagger(b) @ b - np.eye(2)).max() > ATOL_INVARIANT:
            raise InvariantError(f"block of E[{self.i},{self.j}] is not unitary")
        b.setflags(write=False)
        object.__setattr__(self, "block", b)

    def embed(self, n: int) -> np.ndarray:
        m = np.eye(n, dtype=complex)
        a, b = self.j - 1, self.i - 1
        m[np.ix_([a, b], [a, b])] = self.block
        return m


@dataclass(frozen=True, eq=False)
class DecompositionPlan:
    """``rotations`` are listed left to right as they appear in the product."""

    dim: int
    rotations: tuple[TwoLevelRotation, ...]
    phase_diag: np.ndarray

    def __post_init__(self):
        s = np.array(self.phase_diag, dtype=complex).reshape(-1)
        if s.size != self.dim:
            raise InvariantError(f"phase screen has {s.size} entries for dimension {self.dim}")
        if np.abs(np.abs(s) - 1).max() > ATOL_INVARIANT:
            raise InvariantError("phase screen entries must have unit modulus")
        if len(self.rotations) > self.dim * (self.dim - 1) // 2:
            raise InvariantError("more two-level rotations than N(N-1)/2")
        for r in self.rotations:
            if r.i > self.dim:
                raise InvariantError(f"rotation E[{r.i},{r.j}] exceeds dimension {self.dim}")
        s.setflags(write=False)
        object.__setattr__(self, "phase_diag", s)
        object.__setattr__(self, "rotations", tuple(self.rotations))


def reck_order(n: int) -> list[tuple[int, int]]:
    """(i, j) pairs in product order: E[N,N-1], E[N,N-2], ..., E[N,1], E[N-1,N-2], ..., E[2,1]."""
    return [(i, j) for i in range(n, 1, -1) for j in range(i - 1, 0, -1)]


def decompose(u: UnitaryChannel) -> DecompositionPlan:
    """Null the strictly lower triangle of U with two-level row operations.

    The row operations are applied in the reverse of the product order
    (E[2,1] first), which nulls row 2, then row 3 left to right, and so on.
    What remains is a diagonal D; it is moved to the right of the product by
    conjugating every block with D, leaving S = D^-1.
    """
    n = u.dim
    m = np.array(u.matrix, dtype=complex)
    applied = []
    for i, j in reversed(reck_order(n)):
        a, b = m[j - 1, j - 1], m[i - 1, j - 1]
        r = math.hypot(abs(a), abs(b))
        if abs(b) == 0.0 or r == 0.0:
            g = np.eye(2, dtype=complex)
        else:
            g = np.array([[a.conjugate(), b.conjugate()], [-b, a]]) / r
        rows = [j - 1, i - 1]
        m[rows, :] = g @ m[rows, :]
        m[i - 1, j - 1] = 0.0
        applied.append((i, j, g))
    d = np.diag(m).copy()
    d = d / np.abs(d)
    rotations = []
    for i, j, g in reversed(applied):
        dj, di = d[j - 1], d[i - 1]
        conj = np.array([[g[0, 0], g[0, 1] * di / dj], [g[1, 0] * dj / di, g[1, 1]]])
        rotations.append(TwoLevelRotation(i, j, conj))
    return DecompositionPlan(n, tuple(rotations), d.conj())


def plan_product(plan: DecompositionPlan) -> np.ndarray:
    """E[N,N-1] ... E[2,1] . S as a dense matrix (the inverse of the source unitary)."""
    out = np.eye(plan.dim, dtype=complex)
    for r in plan.rotations:
        out = out @ r.embed(plan.dim)
    return out @ np.diag(plan.phase_diag)


def reconstruct(plan: DecompositionPlan) -> UnitaryChannel:
    return UnitaryChannel(dagger(plan_product(plan)))


def reconstruction_error(u: UnitaryChannel, plan: DecompositionPlan) -> float:
    return float(np.abs(dagger(plan_product(plan)) - u.matrix).max())


# --------------------------------------------------------------------------
# Optical layout


@dataclass(frozen=True, eq=False)
class WavePlateSet:
    """Two half-wave plates and a quarter-wave plate: a 2x2 unitary on (H, V) of one mode."""

    mode: int
    block: np.ndarray
    rotation: tuple[int, int] | None = None
    kind: str = field(default="WavePlateSet", init=False)


@dataclass(frozen=True)
class BeamDisplacer:
    kind: str = field(default="BeamDisplacer", init=False)


@dataclass(frozen=True)
class HalfWavePlate45:
    mode: int
    kind: str = field(default="HalfWavePlate45", init=False)


@dataclass(frozen=True)
class QuartzCrystal:
    mode: int
    thickness_mm: float
    kind: str = field(default="QuartzCrystal", init=False)


Slot = tuple[int, str]


@dataclass(frozen=True, eq=False)
class OpticalLayout:
    """Declarative element list.

    ``input_slots[k]`` / ``output_slots[k]`` give the (spatial mode,
    polarization) carrying basis level ``k + 1`` at the input and output.
    ``output_reversed`` records that the mesh leaves the level labels in
    reverse spatial order; no compensating optics are emitted.
    """

    dim: int
    encoding: str
    elements: tuple
    input_slots: tuple[Slot, ...]
    output_slots: tuple[Slot, ...]
    output_reversed: bool = False

    def __post_init__(self):
        for slots in (self.input_slots, self.output_slots):
            if len(slots) != self.dim or len(set(slots)) != self.dim:
                raise InvariantError("encoding must cover every basis level exactly once")

    @property
    def bd_count(self) -> int:
        return sum(isinstance(e, BeamDisplacer) for e in self.elements)

    @property
    def wave_plate_sets(self) -> list[WavePlateSet]:
        return [e for e in self.elements if isinstance(e, WavePlateSet)]


def expected_bd_count(n: int) -> int:
    if n == 2:
        return 0
    return 2 * n - 4 if n % 2 == 0 else 2 * n - 3


def encoding_slots(n: int) -> list[Slot]:
    """Level -> (spatial mode, polarization), spatial modes counted from 1.

    Even N: (1,2)->H1,V1; (3,4)->H2,V2; ...
    Odd N: 1->H1; (2,3)->H2,V2; ...
    """
    if n % 2 == 0:
        return [(k // 2 + 1, H if k % 2 == 0 else V) for k in range(n)]
    return [(1, H)] + [((k + 1) // 2 + 1, H if k % 2 == 1 else V) for k in range(1, n)]


def _schedule(n: int):
    """Assign each mesh step to a layer of disjoint nearest-neighbour position pairs.

    Physically the light meets E[N,N-1]^-1 first. Position p initially holds
    level p; every step swaps the two levels it acts on so the higher level
    walks down the line, which is why the output ends up reversed.
    """
    pos_of = {lvl: lvl for lvl in range(1, n + 1)}
    base = 1 if n % 2 == 0 else 2  # lower position of a pair in layer 0
    last = {p: -1 for p in range(1, n + 1)}
    steps = []
    for i, j in reck_order(n):
        a, b = sorted((pos_of[i], pos_of[j]))
        if b != a + 1:
            raise AssertionError("mesh step between non-adjacent positions")
        layer = max(last[a], last[b]) + 1
        if (a - base - layer) % 2:
            layer += 1
        last[a] = last[b] = layer
        steps.append((layer, a, (i, j), dict(pos_of)))
        pos_of[i], pos_of[j] = pos_of[j], pos_of[i]
    return steps, pos_of


def _pairs_for_layer(n: int, layer: int) -> list[tuple[int, int]]:
    start = (1 if n % 2 == 0 else 2) + (layer % 2)
    start = start if start <= 2 else start - 2
    return [(a, a + 1) for a in range(start, n, 2)]


def _bd_targets(n: int, pairs: list[tuple[int, int]]) -> dict[int, str]:
    """Polarization each position must carry before a displacer so ``pairs`` meet after it."""
    partner = {}
    for a, b in pairs:
        partner[a], partner[b] = b, a
    pol = {}
    for p in range(1, n + 1):
        if p in partner:
            pol[p] = H if partner[p] > p else V
        else:
            pol[p] = H if p == n else V
    return pol


def emit_layout(plan: DecompositionPlan) -> OpticalLayout:
    """Place one wave plate set per two-level rotation on a displacer cascade.

    Layers of co-propagating pairs alternate between the two nearest-neighbour
    pairings of the level line; a beam displacer between layers re-pairs
    them, preceded by 45-degree half-wave plates wherever the polarization
    order needs flipping (those swaps are folded into a wave plate set when
    the mode already has one). Odd N gets one more displacer at the end so
    the output returns to the odd-N pairing, in reversed order.
    The output phase screen is folded into the last wave plate set acting
    on each position.
    """
    n = plan.dim
    slots_in = encoding_slots(n)
    if n == 1:
        return OpticalLayout(1, "odd", (), tuple(slots_in), tuple(slots_in))
    steps, final_pos = _schedule(n)
    n_layers = max(s[0] for s in steps) + 1
    by_order = {(r.i, r.j): r for r in plan.rotations}

    # Logical op on levels for each step: the light sees E^-1 = E^dag.
    step_ops = {}
    for layer, a, (i, j), pos_before in steps:
        r = by_order.get((i, j))
        block = np.eye(2, dtype=complex) if r is None else dagger(r.block)
        # Rows/cols of ``block`` are (level j, level i). Map to positions
        # before (level -> position) and after (levels swapped).
        pa_j, pa_i = pos_before[j], pos_before[i]
        q = np.zeros((2, 2), dtype=complex)
        idx_in = {pa_j: 0, pa_i: 1}  # position -> block column
        idx_out = {pa_i: 0, pa_j: 1}  # after the swap level j sits at pa_i
        for p_out in (a, a + 1):
            for p_in in (a, a + 1):
                q[p_out - a, p_in - a] = block[idx_out[p_out], idx_in[p_in]]
        step_ops[(layer, a)] = [q, (i, j)]

    # Output phases: level l ends at final_pos[l] and needs conj(S_l)... S^-1.
    s_inv = plan.phase_diag.conj()
    last_touch = {}
    for (layer, a) in sorted(step_ops):
        last_touch[a] = last_touch[a + 1] = (layer, a)
    for lvl, p in final_pos.items():
        layer, a = last_touch[p]
        step_ops[(layer, a)][0][p - a, :] *= s_inv[lvl - 1]

    # Slot bookkeeping: position -> (mode, pol).
    slot_of = {p: slots_in[p - 1] for p in range(1, n + 1)}
    elements = []
    for layer in range(n_layers):
        pairs = _pairs_for_layer(n, layer)
        if layer + 1 < n_layers:
            after = _bd_targets(n, _pairs_for_layer(n, layer + 1))
        elif n % 2:
            after = _bd_targets(n, [(a, a + 1) for a in range(1, n, 2)])
        else:
            after = None
        for a, b in pairs:
            mode = slot_of[a][0]
            if slot_of[b][0] != mode:
                raise AssertionError("paired positions are not co-propagating")
            op = step_ops.get((layer, a))
            want = after if after is not None else {a: slot_of[a][1], b: slot_of[b][1]}
            if op is None:
                if want[a] != slot_of[a][1]:
                    elements.append(HalfWavePlate45(mode))
            else:
                q, order = op
                m_in = _pol_matrix(slot_of[a][1])
                m_out = _pol_matrix(want[a])
                elements.append(WavePlateSet(mode, m_out @ q @ m_in.T, rotation=order))
            slot_of[a], slot_of[b] = (mode, want[a]), (mode, want[b])
        if after is not None:
            paired = {p for pr in pairs for p in pr}
            for p in range(1, n + 1):
                if p not in paired and after[p] != slot_of[p][1]:
                    elements.append(HalfWavePlate45(slot_of[p][0]))
                    slot_of[p] = (slot_of[p][0], after[p])
            elements.append(BeamDisplacer())
            slot_of = {p: ((m + 1, pol) if pol == H else (m, pol)) for p, (m, pol) in slot_of.items()}

    out_slots = tuple(slot_of[final_pos[lvl]] for lvl in range(1, n + 1))
    return OpticalLayout(n, "even" if n % 2 == 0 else "odd", tuple(elements), tuple(slots_in),
                         out_slots, output_reversed=n > 1)


def _pol_matrix(lower_pol: str) -> np.ndarray:
    """Map (lower position, upper position) amplitudes to (H, V) amplitudes."""
    return np.eye(2, dtype=complex) if lower_pol == H else np.array([[0, 1], [1, 0]], dtype=complex)


def simulate_layout(layout: OpticalLayout) -> np.ndarray:
    """Propagate each input level through the element list; returns the level-to-level matrix.

    Quartz crystals are ignored: they only act on coherence, not on the
    unitary part of the transfer matrix.
    """
    n = layout.dim
    out = np.zeros((n, n), dtype=complex)
    for k in range(n):
        amp = {layout.input_slots[k]: 1.0 + 0j}
        for e in layout.elements:
            if isinstance(e, BeamDisplacer):
                amp = {((m + 1, p) if p == H else (m, p)): v for (m, p), v in amp.items()}
            elif isinstance(e, HalfWavePlate45):
                h, v = amp.pop((e.mode, H), 0j), amp.pop((e.mode, V), 0j)
                amp[(e.mode, H)], amp[(e.mode, V)] = v, h
            elif isinstance(e, WavePlateSet):
                h, v = amp.pop((e.mode, H), 0j), amp.pop((e.mode, V), 0j)
                nh, nv = e.block @ np.array([h, v])
                amp[(e.mode, H)], amp[(e.mode, V)] = nh, nv
        for lvl in range(n):
            out[lvl, k] = amp.get(layout.output_slots[lvl], 0j)
    return out


# --------------------------------------------------------------------------
# Blind measurement by birefringent delay


DEFAULT_BIREFRINGENCE = 0.00894


@dataclass(frozen=True)
class CoherenceSpec:
    wavelength_nm: float = 801.6
    bandwidth_nm: float = 3.0
    birefringence: float = DEFAULT_BIREFRINGENCE

    def __post_init__(self):
        for name in ("wavelength_nm", "bandwidth_nm", "birefringence"):
            val = getattr(self, name)
            if not (isinstance(val, (int, float)) and math.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be a positive finite number, got {val!r}")
        if self.bandwidth_nm > self.wavelength_nm:
            raise ValueError("bandwidth must not exceed the central wavelength")

    @property
    def coherence_length_mm(self) -> float:
        return self.wavelength_nm ** 2 / self.bandwidth_nm * 1e-6


def min_quartz_thickness(spec: CoherenceSpec) -> float:
    """Thickness (mm) whose H/V optical path difference exceeds the coherence length."""
    return spec.coherence_length_mm / spec.birefringence


def quartz_is_sufficient(thickness_mm: float, spec: CoherenceSpec) -> bool:
    return thickness_mm >= min_quartz_thickness(spec)


def blind_measurement_layout(n: int, spec: CoherenceSpec, unit_mm: float | None = None) -> OpticalLayout:
    """Quartz crystals of thickness (k-1)*t in path k (k = 2..n), path 1 left bare.

    With every level routed to its own path, any two paths differ by at
    least t >= the minimum thickness, so all pairwise coherences vanish.
    """
    if n < 2:
        raise ValueError(f"dimension must be >= 2, got {n}")
    t_min = min_quartz_thickness(spec)
    t = t_min if unit_mm is None else float(unit_mm)
    if t < t_min:
        raise ValueError(f"unit thickness {t} mm is below the minimum {t_min:.4f} mm")
    elements = tuple(QuartzCrystal(k, (k - 1) * t) for k in range(2, n + 1))
    slots = tuple((k, H) for k in range(1, n + 1))
    return OpticalLayout(n, "path", elements, slots, slots)
