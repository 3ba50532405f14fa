"""Acceptance checks, one or more tests per criterion.

Each test carries a ``criterion`` marker; conftest prints a PASS/FAIL line
per criterion at the end of the run.
"""

import json
import math

import numpy as np
import pytest

from qwitness.cli import main
from qwitness.qudit import OrthonormalBasis, random_pure_state, random_unitary
from qwitness.reck import CoherenceSpec, decompose, emit_layout, min_quartz_thickness, reconstruct
from qwitness.shotnoise import DetectorProfile, estimate_witness, sd_of_violation
from qwitness.witness import Channel, WitnessConfig, builtin_configs, full_report, optimal_config

criterion = pytest.mark.criterion


# 1

@criterion(1, "ideal qubit witnesses W=0.5, V=1.0, controls 0 (1e-12)")
def test_criterion_01_ideal_qubit():
    cfgs = builtin_configs("paper-qubit")
    w, v = full_report(cfgs["w"]), full_report(cfgs["v"])
    assert abs(w.superposition_value - 0.5) <= 1e-12
    assert abs(v.superposition_value - 1.0) <= 1e-12
    assert all(abs(c) <= 1e-12 for c in w.control_values + v.control_values)
    assert w.violated and v.violated


# 2

@criterion(2, "ideal qutrit witnesses W=2/3, V=1.0 (1e-12)")
def test_criterion_02_ideal_qutrit():
    cfgs = builtin_configs("paper-qutrit")
    assert abs(full_report(cfgs["w"]).superposition_value - 2 / 3) <= 1e-12
    assert abs(full_report(cfgs["v"]).superposition_value - 1.0) <= 1e-12


# 3

@criterion(3, "dimension sweep N=2..8: W=1-1/N, V=1 (1e-10)")
def test_criterion_03_dimension_sweep():
    for n in range(2, 9):
        w_cfg, v_cfg, spec = optimal_config(n)
        assert abs(full_report(w_cfg).superposition_value - (1 - 1 / n)) <= 1e-10
        assert abs(full_report(v_cfg).superposition_value - 1.0) <= 1e-10
        assert abs(spec.predicted_w - (1 - 1 / n)) <= 1e-10


# 4, 5

def _haar_v_ensemble(count=1000, seed=2024):
    rng = np.random.default_rng(seed)
    for k in range(count):
        n = int(rng.integers(2, 7))
        basis = OrthonormalBasis(random_unitary(n, 3 * k).matrix)
        yield WitnessConfig(
            basis,
            random_pure_state(n, rng).amplitudes,
            Channel(random_unitary(n, 3 * k + 1)),
            random_unitary(n, 3 * k + 2),
            random_pure_state(n, rng).projector(),
        )


@pytest.fixture(scope="module")
def v_reports():
    return [full_report(cfg) for cfg in _haar_v_ensemble()]


@criterion(4, "sum rule |sum_i V_i| < 1e-9 over 1000 Haar configs")
def test_criterion_04_sum_rule(v_reports):
    assert len(v_reports) == 1000
    worst = max(abs(sum(r.control_values)) for r in v_reports)
    assert worst < 1e-9


@criterion(5, "bound V_sigma - max_i V_i <= 1 and V_sigma - min_i V_i >= -1 (1e-9) over the same ensemble")
def test_criterion_05_bound(v_reports):
    # violation_margin = V_sigma - max_i V_i, lower_margin = min_i V_i - V_sigma.
    assert max(r.violation_margin for r in v_reports) <= 1 + 1e-9
    assert max(r.lower_margin for r in v_reports) <= 1 + 1e-9


# 6

@criterion(6, "Reck round trip < 1e-10 and beam-displacer counts, 500 unitaries per N=2..10")
def test_criterion_06_reck_round_trip():
    for n in range(2, 11):
        expected_bd = 0 if n == 2 else (2 * n - 4 if n % 2 == 0 else 2 * n - 3)
        for seed in range(500):
            u = random_unitary(n, 10_000 * n + seed)
            plan = decompose(u)
            assert np.abs(reconstruct(plan).matrix - u.matrix).max() < 1e-10
            assert emit_layout(plan).bd_count == expected_bd


# 7

@criterion(7, "default quartz thickness 23.97 mm within 1%")
def test_criterion_07_quartz():
    assert min_quartz_thickness(CoherenceSpec()) == pytest.approx(23.97, rel=0.01)


# 8

TRIALS = 10_000
TOTAL = 13_000


@criterion(8, "shot noise at 13000 counts: W2D mean within 3 SE of 0.5, stds within x2 of 0.0060 / 0.0020")
def test_criterion_08_qubit_w():
    cfg = builtin_configs("paper-qubit")["w"]
    r = estimate_witness(cfg, cfg.superposition(), TOTAL, DetectorProfile.ideal(2), TRIALS, 1)
    assert abs(r.witness_mean - 0.5) < 3 * r.witness_std / math.sqrt(TRIALS)
    assert 0.0060 / 2 <= r.witness_std <= 0.0060 * 2


@criterion(8, "shot noise at 13000 counts: W2D mean within 3 SE of 0.5, stds within x2 of 0.0060 / 0.0020")
def test_criterion_08_qutrit_v_std():
    # The ideal V3D configuration sends every click to the same detector in
    # both arms, so the statistical spread is exactly zero; see the ledger.
    cfg = builtin_configs("paper-qutrit")["v"]
    r = estimate_witness(cfg, cfg.superposition(), TOTAL, DetectorProfile.ideal(3), TRIALS, 2)
    assert 0.0020 / 2 <= r.witness_std <= 0.0020 * 2


# 9

@criterion(9, "sd_of_violation arithmetic: 35.36 (0.01), 0 when sup equals max control")
def test_criterion_09_significance():
    assert sd_of_violation(0.5, 1e-4, (0, 0), (1e-4, 1e-4)) == pytest.approx(35.36, abs=0.01)
    assert sd_of_violation(0.25, 1e-4, (0.1, 0.25), (1e-4, 1e-4)) == 0.0
    assert sd_of_violation(0.25, 0.0, (0.25,), (0.0,)) == 0.0


# 10

@criterion(10, "noise JSON byte-identical for a fixed seed across repeats and thread counts")
def test_criterion_10_determinism(capsys):
    argv = ["noise", "--builtin", "paper-qubit", "--which", "v", "--totals", "1000,13000",
            "--trials", "500", "--seed", "42", "--output", "json"]
    outputs = []
    for workers in (1, 1, 2, 4, 8):
        assert main(argv + ["--workers", str(workers)]) == 0
        outputs.append(capsys.readouterr().out.encode())
    assert len(set(outputs)) == 1
    assert json.loads(outputs[0])["results"][0]["seed"] == 42
