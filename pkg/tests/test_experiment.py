import math
import random

import pytest

from gridshare.attacks import AttackOutcome
from gridshare.coding import (
    ONE_LAYER_ALL,
    ONE_LAYER_TWO,
    REPETITION,
    TWO_LAYER,
)
from gridshare.experiment import (
    ExperimentConfig,
    LinkDelayModel,
    analytic_recovery,
    emit_results,
    run_all,
    run_entropy_experiment,
    run_latency_experiment,
    run_recovery_experiment,
    simulate_delivery,
    wilson_interval,
)


def test_analytic_values():
    for p in (0.0, 0.3, 0.5, 1.0):
        assert analytic_recovery(TWO_LAYER, p) == 1.0
        assert analytic_recovery(REPETITION, p) == 1.0
    assert analytic_recovery(ONE_LAYER_ALL, 0.5) == pytest.approx(0.25)
    assert analytic_recovery(ONE_LAYER_TWO, 0.5) == pytest.approx(1 - 2 / 3 * 0.25)
    with pytest.raises(ValueError):
        analytic_recovery(TWO_LAYER, 1.5)


@pytest.mark.parametrize("scheme", [ONE_LAYER_ALL, ONE_LAYER_TWO])
@pytest.mark.parametrize("p", [0.2, 0.5, 0.9])
def test_analytic_matches_weighted_enumeration(scheme, p):
    # exhaustive outcome space: {no attack, target 0..2} per layer, weighted
    rng = random.Random(17)
    message = rng.randbytes(24)
    total = 0.0
    for op in (None, 0, 1, 2):
        w_op = (1 - p) if op is None else p / 3
        for rel in (None, 0, 1, 2):
            w_rel = (1 - p) if rel is None else p / 3
            ok = simulate_delivery(
                scheme, message, AttackOutcome(op, rel), random.Random(18)
            )
            total += w_op * w_rel * ok
    assert total == pytest.approx(analytic_recovery(scheme, p), abs=1e-12)


def test_two_layer_and_repetition_recover_under_every_outcome():
    # covers repetition at p=1.0: any realizable loss leaves a decodable set
    rng = random.Random(4)
    message = rng.randbytes(40)
    for scheme in (TWO_LAYER, REPETITION):
        for op in (None, 0, 1, 2):
            for rel in (None, 0, 1, 2):
                assert simulate_delivery(
                    scheme, message, AttackOutcome(op, rel), random.Random(6)
                ), (scheme, op, rel)


def test_wilson_interval_sanity():
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi
    assert wilson_interval(0, 100)[0] == 0.0
    assert wilson_interval(100, 100)[1] == 1.0
    with pytest.raises(ValueError):
        wilson_interval(0, 0)


def small_config(**kwargs):
    defaults = dict(
        schemes=(TWO_LAYER, ONE_LAYER_ALL, ONE_LAYER_TWO, REPETITION),
        p_grid=(0.3, 0.5),
        trials=400,
        seed=7,
        payload_size=16,
        latency_messages=40,
    )
    defaults.update(kwargs)
    return ExperimentConfig(**defaults)


def test_recovery_experiment_small_run():
    curves = run_recovery_experiment(small_config())
    for p_idx in range(2):
        assert curves[TWO_LAYER].points[p_idx].rate == 1.0
        assert curves[REPETITION].points[p_idx].rate == 1.0
    one_layer = curves[ONE_LAYER_ALL].at(0.5)
    assert abs(one_layer.rate - 0.25) < 0.07
    assert one_layer.ci_lo <= 0.25 <= one_layer.ci_hi


def test_recovery_experiment_deterministic():
    assert run_recovery_experiment(small_config()) == run_recovery_experiment(
        small_config()
    )


def test_meta_ci_coverage_over_seeds():
    # pooled over 20 seeds x 10 grid points x 2 nontrivial schemes, the
    # analytic value must land inside the Wilson interval >= 95% of the time
    covered = total = 0
    for seed in range(20):
        config = ExperimentConfig(
            schemes=(ONE_LAYER_ALL, ONE_LAYER_TWO),
            trials=250,
            seed=seed,
            payload_size=8,
        )
        for curve in run_recovery_experiment(config).values():
            for pt in curve.points:
                total += 1
                covered += pt.ci_lo <= pt.analytic <= pt.ci_hi
    assert total == 20 * 10 * 2
    assert covered / total >= 0.95


def test_entropy_experiment_rows():
    rows = run_entropy_experiment(small_config())
    by_scheme = {r.scheme: r for r in rows}
    assert by_scheme[TWO_LAYER].payload_bits >= 100_000
    assert by_scheme[TWO_LAYER].entropy_per_bit >= 0.99
    assert by_scheme[TWO_LAYER].plaintext_found is False
    assert by_scheme[ONE_LAYER_ALL].entropy_per_bit >= 0.99
    assert by_scheme[REPETITION].entropy_per_bit == 0.0
    assert by_scheme[REPETITION].plaintext_found is True


def test_entropy_experiment_rejects_small_captures():
    with pytest.raises(ValueError):
        run_entropy_experiment(
            small_config(entropy_messages=2, entropy_payload_size=64)
        )


def test_simulated_latency_is_deterministic_and_ordered():
    config = small_config()
    rows_a = run_latency_experiment(config)
    rows_b = run_latency_experiment(config)
    assert rows_a == rows_b
    by_scheme = {r.scheme: r for r in rows_a}
    assert by_scheme[REPETITION].mean_ms <= by_scheme[TWO_LAYER].mean_ms
    assert by_scheme[REPETITION].mean_ms <= by_scheme[ONE_LAYER_ALL].mean_ms


def test_delay_models():
    rng = random.Random(3)
    assert LinkDelayModel(kind="fixed", value_ms=7.5).sample_ms(rng) == 7.5
    u = LinkDelayModel(kind="uniform", low_ms=1.0, high_ms=2.0).sample_ms(rng)
    assert 1.0 <= u <= 2.0
    e = LinkDelayModel(kind="exponential", mean_ms=5.0).sample_ms(rng)
    assert e >= 0.0
    with pytest.raises(ValueError):
        LinkDelayModel(kind="bogus").sample_ms(rng)


def test_emit_results_files_and_determinism(tmp_path):
    config = small_config(trials=120, latency_messages=25, p_grid=(0.5,))
    results = run_all(config)
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    emit_results(results, out_a)
    emit_results(run_all(config), out_b)
    for name in ("recovery.csv", "entropy.csv", "latency.csv", "summary.txt"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()
    recovery_lines = (out_a / "recovery.csv").read_text().strip().splitlines()
    assert len(recovery_lines) == 1 + len(config.schemes) * len(config.p_grid)
    assert (out_a / "recovery.png").stat().st_size > 1000
    assert (out_a / "latency.png").stat().st_size > 1000
    summary = (out_a / "summary.txt").read_text()
    assert "31%" in summary and "153" in summary  # external reference values


def test_config_parsing_and_validation():
    raw = {
        "schemes": [TWO_LAYER, REPETITION],
        "p_grid": [0.1, 0.9],
        "trials": 10,
        "seed": 3,
        "entropy": {"messages": 50, "payload_size": 300},
        "latency": {"mode": "simulated", "messages": 10,
                    "link_delay": {"kind": "fixed", "value_ms": 3.0}},
    }
    config = ExperimentConfig.from_dict(raw)
    assert config.schemes == (TWO_LAYER, REPETITION)
    assert config.link_delay.kind == "fixed"
    with pytest.raises(ValueError):
        ExperimentConfig(trials=0)
    with pytest.raises(ValueError):
        ExperimentConfig(p_grid=(1.2,))
    with pytest.raises(ValueError):
        ExperimentConfig(latency_mode="warp")
