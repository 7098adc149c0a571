import math
import os

import numpy as np
import pytest

from beamforge.channel import build_dictionary
from beamforge.harness import (
    ConfigurationError,
    ExperimentConfig,
    derive_rng,
    expand_cells,
    parse_config,
    random_baseline,
    run_convergence_trace,
    run_design,
    run_histogram,
    run_sweep,
)
from beamforge.hybrid import PhaseSet


def _tiny_config(tmp_path, **overrides):
    base = dict(
        n_tx=6, n_rx=4, n_rf=2, n_streams=2, t_tx=4, t_rx=4, g_tx=8, g_rx=6,
        num_paths=2, schemes=["random_low"], bits_list=[2.0],
        pnr_grid_db=[0.0, 10.0], dnr_grid_db=[], num_trials=3, seed=7,
        output_dir=str(tmp_path / "out"), hist_bins=5, hist_trials=2,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def _write_config(tmp_path, text):
    path = tmp_path / "exp.cfg"
    path.write_text(text)
    return str(path)


VALID_TEXT = """
# comment line
n_tx = 6
n_rx = 4
n_rf = 2
n_streams = 2
t_tx = 4
t_rx = 4
g_tx = 8
g_rx = 6
num_paths = 2
schemes = random_low, proposed_inf
bits_list = 2, inf
pnr_grid_db = 0, 10
num_trials = 2
seed = 3
output_dir = {out}
"""


def test_parse_config_roundtrip(tmp_path):
    path = _write_config(tmp_path, VALID_TEXT.format(out=tmp_path / "o"))
    config = parse_config(path)
    assert config.n_tx == 6
    assert config.schemes == ["random_low", "proposed_inf"]
    assert config.bits_list == [2, math.inf]
    assert config.pnr_grid_db == [0.0, 10.0]
    assert config.tx_blocks == 2 and config.rx_blocks == 2


def test_parse_config_rejects_unknown_key(tmp_path):
    path = _write_config(tmp_path, VALID_TEXT.format(out=tmp_path / "o") + "\nbogus = 1\n")
    with pytest.raises(ConfigurationError, match="unknown key"):
        parse_config(path)


def test_parse_config_rejects_missing_key(tmp_path):
    text = VALID_TEXT.format(out=tmp_path / "o").replace("seed = 3\n", "")
    with pytest.raises(ConfigurationError, match="missing"):
        parse_config(_write_config(tmp_path, text))


def test_parse_config_rejects_duplicate_key(tmp_path):
    path = _write_config(tmp_path, VALID_TEXT.format(out=tmp_path / "o") + "\nseed = 4\n")
    with pytest.raises(ConfigurationError, match="duplicate"):
        parse_config(path)


def test_config_validation_errors(tmp_path):
    with pytest.raises(ConfigurationError):
        _tiny_config(tmp_path, t_rx=3).validate()  # not a multiple of n_streams
    with pytest.raises(ConfigurationError):
        _tiny_config(tmp_path, g_rx=4).validate()  # grid not redundant
    with pytest.raises(ConfigurationError):
        _tiny_config(tmp_path, n_streams=3, n_rf=2).validate()
    with pytest.raises(ConfigurationError):
        _tiny_config(tmp_path, schemes=["nope"]).validate()


def test_expand_cells(tmp_path):
    config = _tiny_config(
        tmp_path,
        schemes=["proposed_inf", "proposed_low", "random_low"],
        bits_list=[1.0, 3.0, math.inf],
    )
    cells = expand_cells(config)
    assert ("proposed_inf", math.inf) in cells
    assert ("proposed_low", 1.0) in cells and ("proposed_low", 3.0) in cells
    assert ("random_low", 1.0) in cells and ("random_low", 3.0) in cells
    assert all(b != math.inf for s, b in cells if s != "proposed_inf")


def test_derive_rng_stable_and_independent():
    a = derive_rng(42, "design", "x").standard_normal(4)
    b = derive_rng(42, "design", "x").standard_normal(4)
    c = derive_rng(42, "design", "y").standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_random_baseline_properties():
    d = build_dictionary(6, 8)
    ps = PhaseSet(2)
    h1 = random_baseline(d, 2, 2, 2, ps, derive_rng(0, "a"))
    h2 = random_baseline(d, 2, 2, 2, ps, derive_rng(0, "b"))
    dist = np.min(np.abs(h1.analog[..., None] - ps.alphabet), axis=-1)
    assert np.max(dist) <= 1e-12
    assert not np.array_equal(h1.analog, h2.analog)
    assert np.linalg.norm(h1.combined, "fro") ** 2 == pytest.approx(h1.num_beams, rel=1e-10)


def test_sweep_csv_deterministic(tmp_path):
    config = _tiny_config(tmp_path)
    _, path1 = run_sweep(config)
    data1 = open(path1, "rb").read()
    _, path2 = run_sweep(config)
    data2 = open(path2, "rb").read()
    assert data1 == data2
    header = data1.decode().splitlines()[0]
    assert header == "scheme,bits,x_name,x_value,metric,value,trials,seed"


def test_sweep_cell_independence(tmp_path):
    """Adding a scheme must not change another scheme's rows."""
    small = _tiny_config(tmp_path, schemes=["random_low"])
    records_small, _ = run_sweep(small)
    both = _tiny_config(tmp_path, schemes=["random_low", "proposed_inf"])
    records_both, _ = run_sweep(both)
    small_rows = {(r.scheme, r.bits, r.x_value): r.value for r in records_small}
    for r in records_both:
        if r.scheme == "random_low":
            assert small_rows[(r.scheme, r.bits, r.x_value)] == r.value


def test_sweep_emits_se_records(tmp_path):
    config = _tiny_config(tmp_path, dnr_grid_db=[0.0, 10.0])
    records, _ = run_sweep(config)
    se = [r for r in records if r.metric == "spectral_efficiency_bps_hz"]
    assert {r.x_value for r in se} == {0.0, 10.0}


def test_histogram_counts_and_csv(tmp_path):
    config = _tiny_config(tmp_path)
    results, path = run_histogram(config)
    counts, edges = results[("random_low", 2.0)]
    g = config.g_tx * config.g_rx
    assert counts.sum() == config.hist_trials * g * (g - 1)
    assert os.path.exists(path)
    lines = open(path).read().splitlines()
    assert lines[0] == "scheme,bits,bin_low,bin_high,count"
    assert len(lines) == 1 + config.hist_bins


def test_trace_requires_single_cell(tmp_path):
    config = _tiny_config(tmp_path, schemes=["random_low"], bits_list=[1.0, 2.0])
    with pytest.raises(ConfigurationError):
        run_convergence_trace(config)


def test_trace_writes_csv(tmp_path):
    config = _tiny_config(tmp_path, schemes=["proposed_inf"], bits_list=[math.inf])
    trace, path = run_convergence_trace(config)
    assert len(trace) >= 1
    assert all(a >= b - 1e-10 for a, b in zip(trace, trace[1:]))
    lines = open(path).read().splitlines()
    assert lines[0] == "scheme,bits,iteration,objective"
    assert len(lines) == 1 + len(trace)


def test_unwritable_output_dir_fails_fast(tmp_path):
    blocker = tmp_path / "blocked"
    blocker.write_text("file, not a directory")
    config = _tiny_config(tmp_path, output_dir=str(blocker))
    with pytest.raises(OSError):
        run_sweep(config)


def test_run_design_outputs(tmp_path):
    config = _tiny_config(tmp_path)
    rows, path = run_design(config)
    assert len(rows) == 1
    assert os.path.exists(path)
    npz = os.path.join(config.output_dir, "design_random_low_b2.npz")
    data = np.load(npz)
    assert "rx_analog" in data and "equivalent_dictionary" in data


def test_cli_sweep_writes_figures(tmp_path):
    from beamforge.cli import main

    cfg_text = VALID_TEXT.format(out=tmp_path / "cli_out").replace(
        "schemes = random_low, proposed_inf", "schemes = random_low"
    ).replace("bits_list = 2, inf", "bits_list = 2")
    path = _write_config(tmp_path, cfg_text)
    assert main(["sweep", "--config", path]) == 0
    out = tmp_path / "cli_out"
    assert (out / "sweep.csv").exists()
    assert (out / "nmse_vs_pnr.png").exists()


def test_cli_rejects_bad_config(tmp_path):
    from beamforge.cli import main

    path = _write_config(tmp_path, "n_tx = 4\n")
    assert main(["sweep", "--config", path]) == 2
