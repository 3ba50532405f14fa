"""Quantum witnesses W (blind measurement) and V (generic channel).

Both witnesses compare the probability of a late outcome ``b`` with and
without an intervention at the earlier time:

    W = P(b) - P'(b)     intervention = blind measurement (dephasing)
    V = P(b) - P''(b)    intervention = unitary channel U0

A classical (eigenstate-mixture) explanation forces the value measured on a
superposition to lie between the smallest and largest values measured on
the fixed-point basis states; ``full_report`` checks exactly that.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .qudit import (
    ATOL_INPUT,
    DimensionError,
    InvariantError,
    OrthonormalBasis,
    Projector,
    PureState,
    QuantumState,
    UnitaryChannel,
    apply_unitary,
    born_probability,
    dagger,
    dephase_blocks,
    make_superposition,
)


class WrongInterventionError(TypeError):
    """The witness requested does not match the config's intervention."""


@dataclass(frozen=True, eq=False)
class BlindMeasurement:
    """Unrecorded projective measurement in ``basis``.

    ``groups`` partitions the basis indices into the M outcomes; coherence
    survives inside a group and is destroyed between groups. The default is
    one outcome per basis state (M = N).
    """

    basis: OrthonormalBasis
    groups: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self):
        n = self.basis.dim
        groups = self.groups
        if groups is None:
            groups = tuple((i,) for i in range(n))
        groups = tuple(tuple(int(i) for i in g) for g in groups)
        flat = sorted(i for g in groups for i in g)
        if flat != list(range(n)) or any(len(g) == 0 for g in groups):
            raise InvariantError(f"outcome groups must partition range({n}), got {groups}")
        object.__setattr__(self, "groups", groups)

    @property
    def dim(self) -> int:
        return self.basis.dim

    @property
    def outcomes(self) -> int:
        return len(self.groups)

    def apply(self, state: QuantumState) -> QuantumState:
        if state.dim != self.dim:
            raise DimensionError(f"dimension mismatch: {state.dim} != {self.dim}")
        out = dephase_blocks(state.rho, self.basis.vectors, self.groups)
        return QuantumState((out + dagger(out)) / 2)


@dataclass(frozen=True, eq=False)
class Channel:
    u0: UnitaryChannel

    @property
    def dim(self) -> int:
        return self.u0.dim

    def apply(self, state: QuantumState) -> QuantumState:
        return apply_unitary(state, self.u0)


Intervention = Union[BlindMeasurement, Channel]


@dataclass(frozen=True, eq=False)
class WitnessConfig:
    preferred_basis: OrthonormalBasis
    superposition_coeffs: np.ndarray
    intervention: Intervention
    evolution: UnitaryChannel
    outcome_projector: Projector
    name: str = ""

    def __post_init__(self):
        n = self.preferred_basis.dim
        dims = {
            "intervention": self.intervention.dim,
            "evolution": self.evolution.dim,
            "outcome_projector": self.outcome_projector.dim,
        }
        for what, d in dims.items():
            if d != n:
                raise DimensionError(f"{what} has dimension {d}, expected {n}")
        alpha = np.array(self.superposition_coeffs, dtype=complex).reshape(-1)
        if alpha.size != n:
            raise DimensionError(f"{alpha.size} superposition coefficients for dimension {n}")
        if abs(np.vdot(alpha, alpha).real - 1.0) > ATOL_INPUT:
            raise InvariantError("superposition coefficients are not normalized")
        alpha.setflags(write=False)
        object.__setattr__(self, "superposition_coeffs", alpha)

    @property
    def dim(self) -> int:
        return self.preferred_basis.dim

    @property
    def kind(self) -> str:
        return "w" if isinstance(self.intervention, BlindMeasurement) else "v"

    def superposition(self) -> PureState:
        return make_superposition(self.preferred_basis, self.superposition_coeffs)

    def fixed_points(self) -> list[PureState]:
        return self.preferred_basis.states()


@dataclass(frozen=True)
class WitnessReport:
    kind: str
    control_values: tuple[float, ...]
    superposition_value: float
    p_b: float
    p_after: float
    violation_margin: float
    lower_margin: float
    violated: bool


@dataclass(frozen=True)
class OptimalConfigSpec:
    dim: int
    predicted_w: float
    predicted_v: float = 1.0


def _check_prep(config: WitnessConfig, preparation: PureState) -> QuantumState:
    if preparation.dim != config.dim:
        raise DimensionError(f"preparation has dimension {preparation.dim}, config {config.dim}")
    return preparation.density()


def _late_probability(config: WitnessConfig, rho: QuantumState) -> float:
    return born_probability(apply_unitary(rho, config.evolution), config.outcome_projector)


def compute_witness_w(config: WitnessConfig, preparation: PureState) -> tuple[float, float, float]:
    """Return ``(P(b), P'(b), W)`` for one preparation."""
    if not isinstance(config.intervention, BlindMeasurement):
        raise WrongInterventionError("W needs a blind-measurement intervention")
    rho = _check_prep(config, preparation)
    p_b = _late_probability(config, rho)
    p_prime = _late_probability(config, config.intervention.apply(rho))
    return p_b, p_prime, p_b - p_prime


def compute_witness_v(config: WitnessConfig, preparation: PureState) -> tuple[float, float, float]:
    """Return ``(P(b), P''(b), V)`` for one preparation."""
    if not isinstance(config.intervention, Channel):
        raise WrongInterventionError("V needs a unitary-channel intervention")
    rho = _check_prep(config, preparation)
    p_b = _late_probability(config, rho)
    p_dp = _late_probability(config, config.intervention.apply(rho))
    return p_b, p_dp, p_b - p_dp


def compute_witness(config: WitnessConfig, preparation: PureState) -> tuple[float, float, float]:
    if config.kind == "w":
        return compute_witness_w(config, preparation)
    return compute_witness_v(config, preparation)


def analytic_v(preparation: PureState, u0: UnitaryChannel) -> float:
    """Closed form 1 - |<psi|U0|psi>|^2, valid when the late projector is U1|psi><psi|U1^dag."""
    if preparation.dim != u0.dim:
        raise DimensionError(f"dimension mismatch: {preparation.dim} != {u0.dim}")
    psi = preparation.amplitudes
    return float(1.0 - abs(np.vdot(psi, u0.matrix @ psi)) ** 2)


def full_report(config: WitnessConfig) -> WitnessReport:
    controls = [compute_witness(config, s)[2] for s in config.fixed_points()]
    p_b, p_after, sup = compute_witness(config, config.superposition())
    upper = sup - max(controls)
    lower = min(controls) - sup
    return WitnessReport(
        kind=config.kind,
        control_values=tuple(controls),
        superposition_value=sup,
        p_b=p_b,
        p_after=p_after,
        violation_margin=upper,
        lower_margin=lower,
        violated=bool(upper > 0 or lower > 0),
    )


def control_sum(config: WitnessConfig) -> float:
    return float(sum(compute_witness(config, s)[2] for s in config.fixed_points()))


def theoretical_wmax(m: int) -> float:
    if m < 1:
        raise ValueError(f"number of outcomes must be >= 1, got {m}")
    return 1.0 - 1.0 / m


def _unitary_with_last_row(target: np.ndarray) -> np.ndarray:
    """Deterministic unitary whose last row is ``target^dag``, so U|target> = |N-1>.

    The remaining rows complete ``target`` to an orthonormal basis by
    orthogonalizing the computational basis vectors against it (QR of
    ``[target | I]``).
    """
    n = target.size
    t = target / np.linalg.norm(target)
    q, r = np.linalg.qr(np.column_stack([t, np.eye(n, dtype=complex)]))
    q = q * (np.diag(r)[:n] / np.abs(np.diag(r)[:n]))
    q[:, 0] = t
    return np.vstack([q[:, 1:].conj().T, t.conj()])


def optimal_config(n: int) -> tuple[WitnessConfig, WitnessConfig, OptimalConfigSpec]:
    """Maximally coherent preparation with the late projector aligned to it.

    Returns the W config (blind measurement in the computational basis),
    the V config (root-of-unity phase channel) and the predicted maxima.
    """
    if n < 2:
        raise ValueError(f"dimension must be >= 2, got {n}")
    basis = OrthonormalBasis.computational(n)
    alpha = np.full(n, 1 / np.sqrt(n), dtype=complex)
    u1 = UnitaryChannel(_unitary_with_last_row(alpha))
    proj = Projector.onto_basis_state(n, n - 1)
    phases = np.exp(2j * np.pi * np.arange(n) / n)
    w_cfg = WitnessConfig(basis, alpha, BlindMeasurement(basis), u1, proj, name=f"optimal-{n}d-w")
    v_cfg = WitnessConfig(basis, alpha, Channel(UnitaryChannel(np.diag(phases))), u1, proj,
                          name=f"optimal-{n}d-v")
    return w_cfg, v_cfg, OptimalConfigSpec(dim=n, predicted_w=theoretical_wmax(n), predicted_v=1.0)


# Built-in configurations from the two- and three-level demonstration.

def paper_qubit_matrices() -> dict[str, np.ndarray]:
    return {
        "u0": np.diag([1.0, -1.0]).astype(complex),
        "u1": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
        "alpha": np.array([1, -1], dtype=complex) / np.sqrt(2),
        "projector_index": 1,
    }


def paper_qutrit_matrices() -> dict[str, np.ndarray]:
    w = np.exp(2j * np.pi / 3)
    s6 = np.sqrt(6) / 6
    u1 = np.array([
        [np.sqrt(2 / 3), s6, -s6],
        [0.0, np.sqrt(2) / 2, np.sqrt(2) / 2],
        [np.sqrt(1 / 3), -np.sqrt(1 / 3), np.sqrt(1 / 3)],
    ], dtype=complex)
    return {
        "u0": np.diag([1.0, w, w * w]),
        "u1": u1,
        "alpha": np.array([1, -1, 1], dtype=complex) / np.sqrt(3),
        "projector_index": 2,
    }


BUILTINS = {"paper-qubit": paper_qubit_matrices, "paper-qutrit": paper_qutrit_matrices}


def builtin_configs(name: str) -> dict[str, WitnessConfig]:
    """Return ``{"w": ..., "v": ...}`` for a named built-in experiment."""
    try:
        mats = BUILTINS[name]()
    except KeyError:
        raise KeyError(f"unknown built-in config {name!r}; choose from {sorted(BUILTINS)}") from None
    n = mats["u1"].shape[0]
    basis = OrthonormalBasis.computational(n)
    u1 = UnitaryChannel(mats["u1"])
    proj = Projector.onto_basis_state(n, mats["projector_index"])
    return {
        "w": WitnessConfig(basis, mats["alpha"], BlindMeasurement(basis), u1, proj, name=f"{name}-w"),
        "v": WitnessConfig(basis, mats["alpha"], Channel(UnitaryChannel(mats["u0"])), u1, proj,
                           name=f"{name}-v"),
    }


def with_intervention(config: WitnessConfig, intervention: Intervention) -> WitnessConfig:
    return WitnessConfig(config.preferred_basis, config.superposition_coeffs, intervention,
                         config.evolution, config.outcome_projector, name=config.name)
