"""Experiment configs, fabrication resampling, aggregation, sweeps."""

import json

import numpy as np
import pytest

from gkpsim.circuit import CircuitParams, reference_set
from gkpsim.harness import (
    CSV_COLUMNS,
    ExperimentConfig,
    aggregate,
    load_circuit,
    run_experiment,
    sample_mistargeting,
)

SET3 = reference_set(3)
CHAIN_FIELDS = ("l1_uh", "l2_uh", "l3_uh", "j1p_hghz", "j2p_hghz", "j3p_hghz")


# ---------------------------------------------------------------- config


def test_config_coerces_kind_string():
    cfg = ExperimentConfig(kind="timing_sweep", values=(0.0,))
    assert cfg.kind.value == "timing_sweep"


def test_config_roundtrips_through_dict():
    cfg = ExperimentConfig(
        kind="noise_sweep", values=(0.5, 1.0), n_traj=7, n_dd=4, j_hghz=200.0
    )
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg


def test_config_rejects_unsorted_values():
    with pytest.raises(ValueError, match="sorted"):
        ExperimentConfig(kind="timing_sweep", values=(0.01, 0.0))


def test_config_rejects_non_finite_values():
    with pytest.raises(ValueError, match="finite"):
        ExperimentConfig(kind="timing_sweep", values=(float("nan"),))


def test_config_requires_positive_gate_times():
    with pytest.raises(ValueError, match="positive"):
        ExperimentConfig(kind="gate_time_sweep", values=(0.0, 3.0))


def test_config_rejects_negative_sweep_values():
    with pytest.raises(ValueError, match="non-negative"):
        ExperimentConfig(kind="mistargeting_sweep", values=(-0.01,))


def test_config_sweeps_need_values():
    with pytest.raises(ValueError, match="at least one sweep value"):
        ExperimentConfig(kind="timing_sweep", values=())
    ExperimentConfig(kind="single_gate", values=())  # single gate does not


def test_config_rejects_unknown_kind():
    with pytest.raises(ValueError):
        ExperimentConfig(kind="warp_sweep", values=(1.0,))


@pytest.mark.parametrize(
    "field,value",
    [
        ("n_traj", 0),
        ("n_resample", 0),
        ("n_dd", -1),
        ("cleanup_steps", -2),
        ("prep_cycles", 1.5),
        ("master_seed", -1),
    ],
)
def test_config_rejects_bad_budgets(field, value):
    with pytest.raises(ValueError):
        ExperimentConfig(kind="single_gate", **{field: value})


# ---------------------------------------------------------- load_circuit


def test_load_circuit_by_number_and_digit_string():
    assert load_circuit(3) == SET3
    assert load_circuit("3") == SET3


def test_load_circuit_passthrough():
    assert load_circuit(SET3) is SET3


def test_load_circuit_from_json_file(tmp_path):
    path = tmp_path / "device.json"
    path.write_text(json.dumps(SET3.to_dict()))
    assert load_circuit(str(path)) == SET3


# ---------------------------------------------------- fabrication draws


def test_mistargeting_zero_uncertainty_copies_exactly():
    for seed in range(5):
        drawn = sample_mistargeting(SET3, 0.0, seed)
        assert drawn == SET3


def test_mistargeting_is_reproducible_per_seed():
    a = sample_mistargeting(SET3, 0.01, 42)
    b = sample_mistargeting(SET3, 0.01, 42)
    c = sample_mistargeting(SET3, 0.01, 43)
    assert a == b
    assert a != c


def test_mistargeting_draws_stay_within_five_sigma():
    """At u = 1%, every chain value lies within 5% in >= 99.99% of draws."""
    n = 2000
    inside = 0
    total = 0
    means = {name: 0.0 for name in CHAIN_FIELDS}
    for seed in range(n):
        drawn = sample_mistargeting(SET3, 0.01, seed)
        for name in CHAIN_FIELDS:
            nominal = getattr(SET3, name)
            value = getattr(drawn, name)
            means[name] += value / n
            inside += abs(value - nominal) <= 0.05 * abs(nominal)
            total += 1
    assert inside / total >= 0.9999
    # the mean draw keeps each sign, including the negative coupling
    for name in CHAIN_FIELDS:
        assert np.sign(means[name]) == np.sign(getattr(SET3, name))


def test_mistargeting_keeps_main_junction_and_shunt():
    drawn = sample_mistargeting(SET3, 0.05, 7)
    assert drawn.j_hghz == SET3.j_hghz
    assert drawn.c_ff == SET3.c_ff
    assert drawn.l_uh == pytest.approx(drawn.l1_uh + drawn.l2_uh + drawn.l3_uh)


def test_mistargeting_rejects_bad_uncertainty():
    with pytest.raises(ValueError, match="non-negative"):
        sample_mistargeting(SET3, -0.01, 0)
    with pytest.raises(ValueError, match="non-negative"):
        sample_mistargeting(SET3, float("nan"), 0)


def test_mistargeting_requires_chain():
    bare = CircuitParams(l_uh=2.5)
    with pytest.raises(ValueError, match="chain"):
        sample_mistargeting(bare, 0.01, 0)


# ------------------------------------------------------------- aggregate

X_PLUS = np.array([1.0, 0.0, 0.0])


def test_aggregate_identical_rows_report_exact_zero_spread():
    blochs = np.tile([0.3, 0.1, -0.2], (40, 1))
    mean_f, stderr = aggregate(blochs, X_PLUS)
    assert stderr == 0.0
    assert mean_f == pytest.approx(0.5 * (1.0 + 0.3))


def test_aggregate_opposite_directions_average_to_coin_flip():
    blochs = np.array([X_PLUS, -X_PLUS])
    mean_f, _ = aggregate(blochs, X_PLUS)
    assert mean_f == pytest.approx(0.5)


def test_aggregate_mean_is_permutation_invariant(rng):
    blochs = rng.normal(size=(60, 3)) * 0.2
    mean_f, _ = aggregate(blochs, X_PLUS)
    perm_f, _ = aggregate(blochs[rng.permutation(60)], X_PLUS)
    assert perm_f == pytest.approx(mean_f, abs=1e-15)


def test_aggregate_single_row_has_no_spread():
    mean_f, stderr = aggregate(X_PLUS.reshape(1, 3), X_PLUS)
    assert mean_f == pytest.approx(1.0)
    assert stderr == 0.0


def test_aggregate_rejects_bad_shapes():
    with pytest.raises(ValueError, match="Bloch"):
        aggregate(np.zeros((4, 2)), X_PLUS)


# ------------------------------------------------------- full experiments
#
# These run the production grid, so each config build costs a few
# seconds; the budgets are kept minimal.


@pytest.fixture(scope="module")
def timing_outputs(tmp_path_factory):
    """The same tiny sweep run twice, plus once on two threads."""
    base = tmp_path_factory.mktemp("timing")
    cfg = {"kind": "timing_sweep", "values": (0.0,), "n_traj": 4, "master_seed": 5}
    dirs = []
    for name, threads in (("a", 1), ("b", 1), ("c", 2)):
        out = base / name
        run_experiment(ExperimentConfig(out_dir=str(out), **cfg), threads=threads)
        dirs.append(out)
    return dirs


def test_outputs_are_bit_identical_across_runs(timing_outputs):
    a, b, _ = timing_outputs
    assert (a / "timing_sweep.csv").read_bytes() == (b / "timing_sweep.csv").read_bytes()
    assert (a / "timing_sweep.json").read_bytes() == (b / "timing_sweep.json").read_bytes()


def test_outputs_do_not_depend_on_thread_count(timing_outputs):
    a, _, c = timing_outputs
    assert (a / "timing_sweep.csv").read_bytes() == (c / "timing_sweep.csv").read_bytes()


def test_csv_schema_and_resolution_flag(timing_outputs):
    a, _, _ = timing_outputs
    lines = (a / "timing_sweep.csv").read_text().strip().split("\n")
    assert lines[0] == ",".join(CSV_COLUMNS)
    axis, infid, stderr, n_traj, n_resample, seed = lines[1].split(",")
    assert float(axis) == 0.0
    assert int(n_traj) == 4
    assert int(seed) == 5
    sidecar = json.loads((a / "timing_sweep.json").read_text())
    row = sidecar["results"][0]
    # four trajectories cannot resolve this device's infidelity
    assert float(infid) < row["floor"] == 0.25
    assert row["resolution_limited"] is True
    assert sidecar["errors"] == []


def test_zero_jitter_matches_plain_gate():
    """A timing sweep at zero window reproduces the single-gate point."""
    single = run_experiment(
        ExperimentConfig(kind="single_gate", n_traj=100, master_seed=2)
    )[0]
    timed = run_experiment(
        ExperimentConfig(kind="timing_sweep", values=(0.0,), n_traj=100, master_seed=2)
    )[0]
    sigma = max(np.hypot(single.stderr, timed.stderr), 1e-12)
    assert abs(single.infidelity - timed.infidelity) <= 2.0 * sigma
    assert single.infidelity <= 1e-2


def test_failing_point_is_recorded_and_skipped(tmp_path):
    """A jitter window longer than the segments kills its point only."""
    cfg = ExperimentConfig(
        kind="timing_sweep",
        values=(0.0, 1e6),
        n_traj=2,
        master_seed=3,
        out_dir=str(tmp_path),
    )
    results = run_experiment(cfg)
    assert len(results) == 1
    assert results[0].axis == 0.0
    sidecar = json.loads((tmp_path / "timing_sweep.json").read_text())
    assert len(sidecar["errors"]) == 1
    assert sidecar["errors"][0]["axis"] == 1e6
    lines = (tmp_path / "timing_sweep.csv").read_text().strip().split("\n")
    assert len(lines) == 2  # header plus the surviving point


def test_mistargeting_zero_uncertainty_gives_identical_resamples():
    cfg = ExperimentConfig(
        kind="mistargeting_sweep",
        values=(0.0,),
        n_traj=2,
        n_resample=2,
        master_seed=4,
    )
    row = run_experiment(cfg)[0]
    assert row.n_resample == 2
    # identical circuits, deterministic no-jump evolution: zero spread
    assert row.stderr == 0.0


def test_noise_sweep_smoke():
    cfg = ExperimentConfig(
        kind="noise_sweep", values=(1.0,), n_traj=2, n_resample=1, master_seed=6
    )
    row = run_experiment(cfg)[0]
    assert row.axis == 1.0
    assert 0.0 <= row.infidelity < 0.5
    assert row.leaked == 0


def test_run_experiment_rejects_bad_thread_count():
    cfg = ExperimentConfig(kind="single_gate", n_traj=1)
    with pytest.raises(ValueError, match="thread"):
        run_experiment(cfg, threads=0)
