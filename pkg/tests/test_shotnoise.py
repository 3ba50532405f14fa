import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qwitness.qudit import OrthonormalBasis, PureState, random_pure_state, random_unitary
from qwitness.shotnoise import (
    DetectorProfile,
    UndefinedSignificanceError,
    detector_partition,
    efficiency_correct,
    estimate_witness,
    noise_sweep,
    sample_counts,
    sd_of_violation,
)
from qwitness.witness import Channel, WitnessConfig, builtin_configs, compute_witness

QUBIT = builtin_configs("paper-qubit")
QUTRIT = builtin_configs("paper-qutrit")
IDEAL2 = DetectorProfile.ideal(2)
IDEAL3 = DetectorProfile.ideal(3)


# -- sample_counts

def test_zero_rate_detector_never_fires():
    for seed in range(50):
        assert sample_counts([1, 0], 13000, seed)[1] == 0


def test_poisson_mean_over_trials():
    counts = np.array([sample_counts([0.5, 0.5], 13000, s) for s in range(10_000)])
    sigma = math.sqrt(6500)
    se = sigma / math.sqrt(len(counts))
    for k in range(2):
        assert abs(counts[:, k].mean() - 6500) < 3 * se
        assert counts[:, k].std() == pytest.approx(sigma, rel=0.05)


def test_sample_counts_deterministic_and_validated():
    assert sample_counts([0.2, 0.3, 0.5], 1000, 9) == sample_counts([0.2, 0.3, 0.5], 1000, 9)
    with pytest.raises(ValueError):
        sample_counts([0.5, 0.6], 100, 1)
    with pytest.raises(ValueError):
        sample_counts([1.2, -0.2], 100, 1)
    with pytest.raises(ValueError):
        sample_counts([1.0], 0, 1)


# -- efficiency_correct

def test_efficiency_correct_examples():
    rec = efficiency_correct((100, 200), DetectorProfile((1.0, 0.5)))
    assert rec.corrected_counts == (100.0, 400.0)
    assert rec.total_corrected == 500.0
    assert rec.probabilities == pytest.approx((0.2, 0.8), abs=1e-15)

    rec = efficiency_correct((3, 5, 12), IDEAL3)
    assert rec.probabilities == pytest.approx((0.15, 0.25, 0.6), abs=1e-15)

    assert efficiency_correct((0, 0, 13000), IDEAL3).probabilities == (0.0, 0.0, 1.0)


def test_efficiency_correct_errors():
    with pytest.raises(ValueError):
        efficiency_correct((1, 2, 3), IDEAL2)
    with pytest.raises(ValueError):
        efficiency_correct((0, 0), IDEAL2)
    with pytest.raises(ValueError):
        DetectorProfile((0.9, 0.8))
    with pytest.raises(ValueError):
        DetectorProfile((1.0, 0.0))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 10**6), min_size=1, max_size=6).filter(lambda c: sum(c) > 0),
       st.data())
def test_corrected_probabilities_sum_to_one(raw, data):
    eff = data.draw(st.lists(st.floats(0.05, 1.0), min_size=len(raw), max_size=len(raw)))
    eff[0] = 1.0
    rec = efficiency_correct(raw, DetectorProfile(tuple(eff)))
    assert abs(sum(rec.probabilities) - 1) < 1e-12


# -- sd_of_violation

def test_sd_examples():
    assert sd_of_violation(0.5, 1e-4, (0, 0), (1e-4, 1e-4)) == pytest.approx(0.5 / math.sqrt(2e-4), abs=1e-9)
    assert sd_of_violation(0.5, 1e-4, (0, 0), (1e-4, 1e-4)) == pytest.approx(35.36, abs=0.01)
    assert sd_of_violation(0.3, 0.01, (0.1, 0.3), (0.2, 0.5)) == 0.0
    assert sd_of_violation(0.3, 0.0, (0.3,), (0.0,)) == 0.0
    assert sd_of_violation(1.0, 6.25e-6, (0.0,), (1.5625e-4,)) == pytest.approx(78.45, abs=0.01)


def test_sd_uses_argmax_variance_and_conservative_ties():
    # Variance of the largest control, not the largest variance overall.
    assert sd_of_violation(1.0, 0.0, (0.5, 0.0), (0.01, 100.0)) == pytest.approx(0.5 / 0.1)
    # Tie: take the largest attached variance.
    assert sd_of_violation(1.0, 0.0, (0.5, 0.5), (0.01, 0.04)) == pytest.approx(0.5 / 0.2)


def test_sd_errors():
    with pytest.raises(UndefinedSignificanceError):
        sd_of_violation(1.0, 0.0, (0.0,), (0.0,))
    with pytest.raises(ValueError):
        sd_of_violation(1.0, 0.1, (), ())
    with pytest.raises(ValueError):
        sd_of_violation(1.0, -0.1, (0.0,), (0.1,))


# Dyadic grid so that shifting is exact and ties among controls survive it.
grid = st.integers(-64, 64).map(lambda k: k / 64)


@settings(max_examples=200, deadline=None)
@given(grid, st.floats(1e-6, 1), st.lists(st.tuples(grid, st.floats(1e-6, 1)), min_size=1, max_size=5),
       st.sampled_from([-0.5, -0.125, 0.25, 1.0]))
def test_sd_translation_invariant(sup, sup_var, controls, shift):
    vals = [c for c, _ in controls]
    vars_ = [v for _, v in controls]
    a = sd_of_violation(sup, sup_var, vals, vars_)
    b = sd_of_violation(sup + shift, sup_var, [c + shift for c in vals], vars_)
    assert b == pytest.approx(a, rel=1e-9, abs=1e-9)


# -- detector model

def test_detector_partition():
    projs, mask = detector_partition(QUTRIT["v"])
    assert projs.shape == (3, 3, 3) and mask.tolist() == [False, False, True]
    n = 3
    cfg = WitnessConfig(OrthonormalBasis.computational(n), np.ones(n) / np.sqrt(n), Channel(random_unitary(n, 1)),
                        random_unitary(n, 2), random_pure_state(n, np.random.default_rng(0)).projector())
    projs, mask = detector_partition(cfg)
    assert projs.shape == (2, 3, 3) and mask.tolist() == [True, False]
    np.testing.assert_allclose(projs.sum(axis=0), np.eye(3), atol=1e-15)


# -- estimate_witness

def test_qubit_w_estimate_matches_binomial_scale():
    cfg = QUBIT["w"]
    r = estimate_witness(cfg, cfg.superposition(), 13000, IDEAL2, 10_000, 1)
    assert abs(r.witness_mean - 0.5) < 3 * r.witness_std / math.sqrt(r.trials)
    assert 0.003 <= r.witness_std <= 0.012
    # Intervention arm: P'(b) = 1/2 over ~13000 clicks.
    assert r.witness_std == pytest.approx(math.sqrt(0.25 / 13000), rel=0.05)


def test_huge_total_shrinks_std():
    cfg = QUBIT["w"]
    r = estimate_witness(cfg, cfg.superposition(), 1e9, IDEAL2, 200, 4)
    assert r.witness_std < 1e-4


def test_fixed_point_control_is_zero_on_average():
    cfg = QUBIT["v"]
    r = estimate_witness(cfg, PureState([1, 0]), 13000, IDEAL2, 2000, 8)
    assert abs(r.witness_mean) < 3 * r.witness_std / math.sqrt(r.trials)


def test_detector_efficiency_correction_removes_bias():
    cfg = QUTRIT["w"]
    lossy = DetectorProfile((1.0, 0.6, 0.8))
    r = estimate_witness(cfg, cfg.superposition(), 1e6, lossy, 500, 3)
    assert abs(r.witness_mean - 2 / 3) < 5 * r.witness_std / math.sqrt(r.trials)


def test_estimate_validation():
    cfg = QUBIT["w"]
    with pytest.raises(ValueError):
        estimate_witness(cfg, cfg.superposition(), 13000, IDEAL2, 1, 0)
    with pytest.raises(ValueError):
        estimate_witness(cfg, cfg.superposition(), 13000, IDEAL3, 10, 0)
    with pytest.raises(ValueError):
        estimate_witness(cfg, cfg.superposition(), -5, IDEAL2, 10, 0)


def test_converges_to_ideal_value():
    rng = np.random.default_rng(21)
    for n in (2, 3, 4):
        cfg = WitnessConfig(OrthonormalBasis.computational(n), random_pure_state(n, rng).amplitudes,
                            Channel(random_unitary(n, 30 + n)), random_unitary(n, 40 + n),
                            random_pure_state(n, rng).projector())
        prep = cfg.superposition()
        ideal = compute_witness(cfg, prep)[2]
        r = estimate_witness(cfg, prep, 1e6, IDEAL2, 1000, n)
        assert abs(r.witness_mean - ideal) < 5 * r.witness_std / math.sqrt(r.trials)


def test_std_scales_as_inverse_sqrt_total():
    cfg = QUBIT["w"]
    a = estimate_witness(cfg, cfg.superposition(), 13000, IDEAL2, 10_000, 5)
    b = estimate_witness(cfg, cfg.superposition(), 26000, IDEAL2, 10_000, 6)
    assert a.witness_std / b.witness_std == pytest.approx(math.sqrt(2), rel=0.2)


# -- noise_sweep

def test_sweep_qubit_v_significance():
    (r,) = noise_sweep(QUBIT["v"], [13000], IDEAL2, 2000, 1)
    assert r.sd_of_violation >= 30
    assert len(r.control_means) == 2 and all(s > 0 for s in r.control_stds)


def test_sweep_std_decreases_with_total():
    small, large = noise_sweep(QUBIT["w"], [100, 10000], IDEAL2, 2000, 3)
    assert small.witness_std > large.witness_std


def test_sweep_degenerate_inputs_are_finite():
    (r,) = noise_sweep(QUBIT["w"], [1], IDEAL2, 2, 0)
    assert math.isfinite(r.witness_mean) and math.isfinite(r.witness_std)
    assert all(math.isfinite(x) for x in r.control_means + r.control_stds)


def test_sweep_validation():
    with pytest.raises(ValueError):
        noise_sweep(QUBIT["w"], [], IDEAL2, 10, 0)
    with pytest.raises(ValueError):
        noise_sweep(QUBIT["w"], [100, 0], IDEAL2, 10, 0)


def test_sweep_deterministic_regardless_of_workers():
    serial = noise_sweep(QUTRIT["v"], [500, 13000], IDEAL3, 300, 17, workers=1)
    threaded = noise_sweep(QUTRIT["v"], [500, 13000], IDEAL3, 300, 17, workers=4)
    assert serial == threaded
    assert serial == noise_sweep(QUTRIT["v"], [500, 13000], IDEAL3, 300, 17)
    assert serial != noise_sweep(QUTRIT["v"], [500, 13000], IDEAL3, 300, 18)
