"""Poissonian coincidence-count simulation for witness estimates.

Each trial simulates two runs of the same preparation, one with the
intervention and one without. Every detector's heralded count is drawn
independently from a Poisson law, corrected for relative detector
efficiency, and turned into a probability estimate for the late outcome.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .qudit import ATOL_INPUT, PureState, apply_unitary
from .witness import WitnessConfig, compute_witness

DEFAULT_TOTAL = 13000.0


class UndefinedSignificanceError(ZeroDivisionError):
    """Violation significance requested with zero combined variance."""


@dataclass(frozen=True)
class DetectorProfile:
    efficiencies: tuple[float, ...]

    def __post_init__(self):
        eff = tuple(float(e) for e in self.efficiencies)
        if not eff:
            raise ValueError("need at least one detector")
        if any(not (0.0 < e <= 1.0) for e in eff):
            raise ValueError(f"efficiencies must lie in (0, 1], got {eff}")
        if max(eff) != 1.0:
            raise ValueError("relative efficiencies must be normalized so the best detector is 1")
        object.__setattr__(self, "efficiencies", eff)

    @property
    def n_detectors(self) -> int:
        return len(self.efficiencies)

    @classmethod
    def ideal(cls, n: int) -> "DetectorProfile":
        return cls((1.0,) * n)


@dataclass(frozen=True)
class CountRecord:
    raw_counts: tuple[int, ...]
    corrected_counts: tuple[float, ...]
    total_corrected: float

    @property
    def probabilities(self) -> tuple[float, ...]:
        return tuple(c / self.total_corrected for c in self.corrected_counts)


@dataclass(frozen=True)
class NoiseStudyResult:
    expected_total: float
    witness_mean: float
    witness_std: float
    trials: int
    seed: int
    control_means: tuple[float, ...] = ()
    control_stds: tuple[float, ...] = ()
    sd_of_violation: float | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["control_means"] = list(self.control_means)
        d["control_stds"] = list(self.control_stds)
        return d


def _check_probabilities(p) -> np.ndarray:
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.size == 0 or np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValueError("probabilities must be finite and nonnegative")
    if abs(p.sum() - 1.0) > ATOL_INPUT:
        raise ValueError(f"probabilities sum to {p.sum()!r}, expected 1")
    return p


def sample_counts(probabilities: Sequence[float], expected_total: float, seed) -> tuple[int, ...]:
    """Independent Poisson count per detector with mean p_i * expected_total."""
    p = _check_probabilities(probabilities)
    if not expected_total > 0:
        raise ValueError("expected_total must be positive")
    rng = np.random.default_rng(seed)
    return tuple(int(c) for c in rng.poisson(p * expected_total))


def efficiency_correct(raw: Sequence[int], profile: DetectorProfile) -> CountRecord:
    raw = tuple(int(n) for n in raw)
    if len(raw) != profile.n_detectors:
        raise ValueError(f"{len(raw)} counts for {profile.n_detectors} detectors")
    if any(n < 0 for n in raw):
        raise ValueError("counts must be nonnegative")
    corrected = tuple(n / d for n, d in zip(raw, profile.efficiencies))
    total = sum(corrected)
    if total <= 0:
        raise ValueError("no counts registered; probabilities are undefined")
    return CountRecord(raw, corrected, total)


def sd_of_violation(sup_value: float, sup_var: float,
                    control_values: Sequence[float], control_vars: Sequence[float]) -> float:
    """(sup - max control) / sqrt(Var(sup) + Var(argmax control)).

    Ties for the maximum take the largest attached variance.
    """
    if len(control_values) == 0 or len(control_values) != len(control_vars):
        raise ValueError("need matching, non-empty control values and variances")
    if sup_var < 0 or any(v < 0 for v in control_vars):
        raise ValueError("variances must be nonnegative")
    top = max(control_values)
    var_top = max(v for c, v in zip(control_values, control_vars) if c == top)
    margin = sup_value - top
    if margin == 0:
        return 0.0
    denom = sup_var + var_top
    if denom == 0:
        raise UndefinedSignificanceError("both variances are zero")
    return margin / math.sqrt(denom)


# --------------------------------------------------------------------------
# Detector model


def detector_partition(config: WitnessConfig) -> tuple[np.ndarray, np.ndarray]:
    """Projectors for each detector and a mask of those belonging to outcome b.

    A late projector that is diagonal in the computational basis gets one
    detector per basis state (as with the displacer read-out). Anything else
    is read out as the two-outcome measurement {Pi_b, 1 - Pi_b}.
    """
    pb = config.outcome_projector.matrix
    n = config.dim
    diag = np.diag(pb).real
    if np.allclose(pb, np.diag(diag), atol=1e-12) and np.allclose(diag, np.round(diag), atol=1e-12):
        projs = np.zeros((n, n, n), dtype=complex)
        projs[np.arange(n), np.arange(n), np.arange(n)] = 1.0
        return projs, np.round(diag).astype(bool)
    return np.stack([pb, np.eye(n) - pb]), np.array([True, False])


def _detector_probs(config: WitnessConfig, preparation: PureState, projs) -> tuple[np.ndarray, np.ndarray]:
    rho = preparation.density()
    after = config.intervention.apply(rho)
    out = []
    for state in (rho, after):
        late = apply_unitary(state, config.evolution).rho
        p = np.clip(np.einsum("kij,ji->k", projs, late).real, 0.0, 1.0)
        out.append(p / p.sum())
    return out[0], out[1]


def _estimate(raw: np.ndarray, eff: np.ndarray, mask: np.ndarray) -> float:
    corrected = raw / eff
    total = corrected.sum()
    if total == 0:
        # No clicks: fall back to the uninformed estimate.
        return mask.sum() / mask.size
    return corrected[mask].sum() / total


def trial_seed(seed: int, *keys: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=seed, spawn_key=tuple(keys))


def _run_trials(p_free, p_int, mean_scale, eff, mask, seed, keys, trial_ids) -> np.ndarray:
    out = np.empty(len(trial_ids))
    for k, t in enumerate(trial_ids):
        rng = np.random.default_rng(trial_seed(seed, *keys, t))
        raw_free = rng.poisson(p_free * mean_scale)
        raw_int = rng.poisson(p_int * mean_scale)
        out[k] = _estimate(raw_free, eff, mask) - _estimate(raw_int, eff, mask)
    return out


def _trial_witnesses(config, preparation, expected_total, profile, trials, seed, keys=(), workers=1):
    projs, mask = detector_partition(config)
    if profile.n_detectors != len(mask):
        raise ValueError(f"profile has {profile.n_detectors} detectors, read-out needs {len(mask)}")
    if trials < 2:
        raise ValueError("need at least two trials")
    if not expected_total > 0:
        raise ValueError("expected_total must be positive")
    p_free, p_int = _detector_probs(config, preparation, projs)
    eff = np.asarray(profile.efficiencies)
    # Lossy detectors see fewer photons; correction divides the efficiency back out.
    scale = expected_total * eff
    ids = np.arange(trials)
    if workers <= 1:
        return _run_trials(p_free, p_int, scale, eff, mask, seed, keys, ids)
    chunks = np.array_split(ids, workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(lambda c: _run_trials(p_free, p_int, scale, eff, mask, seed, keys, c), chunks)
        return np.concatenate(list(parts))


def estimate_witness(config: WitnessConfig, preparation: PureState, expected_total: float,
                     profile: DetectorProfile, trials: int, seed: int, workers: int = 1) -> NoiseStudyResult:
    w = _trial_witnesses(config, preparation, expected_total, profile, trials, seed, workers=workers)
    return NoiseStudyResult(float(expected_total), float(w.mean()), float(w.std(ddof=1)), trials, seed)


def noise_sweep(config: WitnessConfig, totals: Sequence[float], profile: DetectorProfile,
                trials: int, seed: int, workers: int = 1) -> list[NoiseStudyResult]:
    """Monte Carlo witness statistics for the superposition and every control, per total."""
    totals = list(totals)
    if not totals or any(not t > 0 for t in totals):
        raise ValueError("totals must be a non-empty list of positive numbers")
    preps = config.fixed_points() + [config.superposition()]
    results = []
    for ti, total in enumerate(totals):
        stats = []
        for pi, prep in enumerate(preps):
            w = _trial_witnesses(config, prep, total, profile, trials, seed, keys=(ti, pi), workers=workers)
            stats.append((float(w.mean()), float(w.std(ddof=1))))
        ctrl, (sup_mean, sup_std) = stats[:-1], stats[-1]
        try:
            sd = sd_of_violation(sup_mean, sup_std ** 2, [m for m, _ in ctrl], [s ** 2 for _, s in ctrl])
        except UndefinedSignificanceError:
            sd = None
        results.append(NoiseStudyResult(
            expected_total=float(total),
            witness_mean=sup_mean,
            witness_std=sup_std,
            trials=trials,
            seed=seed,
            control_means=tuple(m for m, _ in ctrl),
            control_stds=tuple(s for _, s in ctrl),
            sd_of_violation=sd,
        ))
    return results


def ideal_values(config: WitnessConfig) -> tuple[float, list[float]]:
    sup = compute_witness(config, config.superposition())[2]
    return sup, [compute_witness(config, s)[2] for s in config.fixed_points()]
