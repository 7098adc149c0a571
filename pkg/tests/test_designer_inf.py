import numpy as np
import pytest

from conftest import crandn, random_circle_point
from beamforge.channel import build_dictionary, vec
from beamforge.designer_inf import (
    analog_cost_inf,
    design_hybrid_inf,
    egrad_analog_inf,
    extract_digital,
    project_psd,
    solve_digital_psd,
)
from beamforge.harness import random_baseline
from beamforge.hybrid import PhaseSet, block_diag
from beamforge.manifold_opt import finite_difference_gradient, retract
from beamforge.metrics import gram_objective, mutual_coherence


def _dft_columns(n, k):
    f = np.exp(-2j * np.pi * np.outer(np.arange(n), np.arange(n)) / n)
    return f[:, :k]


def test_psd_closed_form_orthogonal_analog():
    n, n_rf = 8, 4
    analog = _dft_columns(n, n_rf)  # constant modulus, W^H W = n I
    result = solve_digital_psd(np.eye(n), analog, 1)
    target = np.eye(n_rf) / n
    optimum = np.linalg.norm(analog @ target @ analog.conj().T - np.eye(n), "fro") ** 2
    assert optimum == pytest.approx(n - n_rf)
    assert result.objective <= optimum * (1.0 + 1e-6)
    assert np.max(np.abs(result.blocks[0] - target)) < 1e-5


def test_psd_zero_analog_returns_zero():
    a = np.eye(5)
    result = solve_digital_psd(a, np.zeros((5, 4)), 2)
    assert result.objective == pytest.approx(5.0)
    assert all(np.allclose(b, 0.0) for b in result.blocks)
    assert result.converged


def test_psd_blocks_are_hermitian_psd(rng):
    a = crandn(rng, 6, 9)
    analog = random_circle_point(rng, (6, 6))
    result = solve_digital_psd(a, analog, 2)
    for block in result.blocks:
        assert np.max(np.abs(block - block.conj().T)) <= 1e-10
        assert np.linalg.eigvalsh(block).min() >= -1e-10


def test_psd_beats_zero_and_start(rng):
    a = crandn(rng, 6, 9)
    analog = random_circle_point(rng, (6, 6))
    start = [np.eye(3) * 0.3 for _ in range(2)]
    result = solve_digital_psd(a, analog, 2, initial_blocks=start)
    zero_obj = 9.0  # ||I_9||_F^2
    assert result.objective <= zero_obj + 1e-12
    # monotone from the supplied start
    s = np.stack([a.conj().T @ analog[:, 3 * q : 3 * (q + 1)] for q in range(2)])
    start_obj = float(
        np.linalg.norm(
            sum(s[q] @ start[q] @ s[q].conj().T for q in range(2)) - np.eye(9), "fro"
        )
        ** 2
    )
    assert result.objective <= start_obj + 1e-12


def _slow_pgd_oracle(a, analog, num_blocks, iterations=100_000):
    """Fixed tiny-step projected gradient, independent of the solver."""
    g = a.shape[1]
    n_rf = analog.shape[1] // num_blocks
    maps = [a.conj().T @ analog[:, q * n_rf : (q + 1) * n_rf] for q in range(num_blocks)]
    lip = 2.0 * sum(np.linalg.norm(m, 2) ** 2 for m in maps) ** 2
    step = 0.5 / lip
    x = [np.zeros((n_rf, n_rf), dtype=complex) for _ in range(num_blocks)]
    eye = np.eye(g)
    for _ in range(iterations):
        s = sum(m @ xq @ m.conj().T for m, xq in zip(maps, x)) - eye
        x_new = []
        for m, xq in zip(maps, x):
            grad = 2.0 * (m.conj().T @ s @ m)
            x_new.append(project_psd(xq - step * grad))
        x = x_new
    s = sum(m @ xq @ m.conj().T for m, xq in zip(maps, x)) - eye
    return float(np.linalg.norm(s, "fro") ** 2)


def test_psd_matches_slow_oracle(rng):
    for trial in range(2):
        a = crandn(rng, 5, 7)
        analog = random_circle_point(rng, (5, 4))
        oracle = _slow_pgd_oracle(a, analog, 2, iterations=20_000)
        result = solve_digital_psd(a, analog, 2)
        assert result.objective <= oracle * (1.0 + 1e-4) + 1e-12


def test_extract_identity_full_rank():
    w = extract_digital(np.eye(4), 4)
    assert np.allclose(w @ w.conj().T, np.eye(4), atol=1e-12)


def test_extract_rank_one(rng):
    v = crandn(rng, 4)
    w = extract_digital(np.outer(v, v.conj()), 1)
    assert np.allclose(w @ w.conj().T, np.outer(v, v.conj()), atol=1e-12)


def test_extract_keeps_top_eigenpairs():
    block = np.diag([4.0, 1.0, 0.0, 0.0])
    w = extract_digital(block, 2)
    assert np.allclose(w @ w.conj().T, block, atol=1e-12)


def test_extract_truncation_is_best_approximation(rng):
    m = crandn(rng, 5, 5)
    block = m @ m.conj().T
    w = extract_digital(block, 2)
    vals = np.linalg.eigvalsh(block)
    residual = np.linalg.norm(w @ w.conj().T - block, "fro") ** 2
    assert residual == pytest.approx(float(np.sum(vals[:-2] ** 2)), rel=1e-10)


def test_extract_rejects_indefinite():
    with pytest.raises(ValueError):
        extract_digital(np.diag([1.0, -0.5]), 1)


def test_egrad_zero_digital(rng):
    a = crandn(rng, 6, 9)
    x = vec(random_circle_point(rng, (6, 4)))
    grad = egrad_analog_inf(x, np.zeros((4, 4)), a)
    assert np.allclose(grad, 0.0)


def test_egrad_matches_finite_differences(rng):
    a = crandn(rng, 5, 8)
    digital = crandn(rng, 6, 4)
    x = vec(random_circle_point(rng, (5, 6)))
    fd = finite_difference_gradient(lambda xv: analog_cost_inf(xv, digital, a), x)
    grad = egrad_analog_inf(x, digital, a)
    assert np.max(np.abs(fd - grad)) / np.max(np.abs(grad)) < 1e-5


def test_egrad_points_downhill(rng):
    a = crandn(rng, 5, 8)
    digital = crandn(rng, 6, 4)
    x = vec(random_circle_point(rng, (5, 6)))
    grad = egrad_analog_inf(x, digital, a)
    before = analog_cost_inf(x, digital, a)
    after = analog_cost_inf(retract(x, -grad, 1e-7), digital, a)
    assert after <= before


def _desk_dictionary():
    return build_dictionary(8, 12)


def test_design_invariants(rng):
    d = _desk_dictionary()
    h = design_hybrid_inf(d, 2, 4, 4, rng)
    assert np.max(np.abs(np.abs(h.analog) - 1.0)) <= 1e-12
    digital = h.digital
    assert digital.shape == (8, 8)
    # block-diagonal: off-block entries exactly zero
    assert np.allclose(digital[:4, 4:], 0.0)
    assert np.allclose(digital[4:, :4], 0.0)
    power = np.linalg.norm(h.combined, "fro") ** 2
    assert power == pytest.approx(h.num_beams, rel=1e-10)


def test_design_outer_trace_non_increasing():
    d = _desk_dictionary()
    for seed in range(5):
        h = design_hybrid_inf(d, 2, 4, 4, np.random.default_rng(seed))
        trace = h.objective_trace
        assert all(a >= b - 1e-10 for a, b in zip(trace, trace[1:]))
        assert trace[-1] <= trace[0]


def test_design_rescaling_preserves_coherence():
    d = _desk_dictionary()
    h = design_hybrid_inf(d, 2, 4, 4, np.random.default_rng(3))
    factor = h.combined.conj().T @ d.matrix
    mu_after = mutual_coherence(factor)
    # undo the power normalization: coherence must not move at all
    unscaled = (h.analog @ (h.digital * 7.3)).conj().T @ d.matrix
    assert mutual_coherence(unscaled) == pytest.approx(mu_after, abs=1e-12)


def test_extraction_lossless_when_streams_equal_chains(rng):
    m = crandn(rng, 4, 4)
    block = m @ m.conj().T
    w = extract_digital(block, 4)
    assert np.linalg.norm(w @ w.conj().T - block, "fro") <= 1e-10 * np.linalg.norm(block, "fro")


def test_design_beats_random_baseline_median():
    d = _desk_dictionary()
    designed, baseline = [], []
    for seed in range(20):
        h = design_hybrid_inf(d, 2, 4, 4, np.random.default_rng(seed))
        designed.append(h.design_objective)
        r = random_baseline(d, 2, 4, 4, PhaseSet(3), np.random.default_rng(seed))
        baseline.append(r.design_objective)
    assert np.median(designed) < np.median(baseline)


def test_design_rejects_too_many_streams(rng):
    with pytest.raises(ValueError):
        design_hybrid_inf(_desk_dictionary(), 2, 2, 3, rng)
