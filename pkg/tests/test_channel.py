import numpy as np
import pytest

from beamforge.channel import (
    build_dictionary,
    invec,
    sample_channel,
    steering_vector,
    vec,
)
from beamforge.metrics import mutual_coherence


def test_steering_single_element():
    assert np.allclose(steering_vector(1, 1.234), [1.0])


def test_steering_broadside():
    # cos(pi/2) = 0 makes every element phase zero
    v = steering_vector(2, np.pi / 2)
    assert np.allclose(v, np.ones(2) / np.sqrt(2))


def test_steering_endfire_alternates():
    v = steering_vector(4, 0.0)
    assert np.allclose(v, 0.5 * np.array([1, -1, 1, -1]), atol=1e-12)


@pytest.mark.parametrize("n,angle", [(3, 0.1), (8, 2.5), (16, np.pi)])
def test_steering_unit_norm(n, angle):
    assert np.linalg.norm(steering_vector(n, angle)) == pytest.approx(1.0, abs=1e-12)


def test_steering_rejects_bad_input():
    with pytest.raises(ValueError):
        steering_vector(0, 1.0)
    with pytest.raises(ValueError):
        steering_vector(4, np.nan)


def test_dictionary_grid_rule():
    d = build_dictionary(2, 4)
    assert np.allclose(np.cos(d.grid_angles), [-1.0, -0.5, 0.0, 0.5], atol=1e-12)
    assert np.allclose(d.grid_angles, [np.pi, 2 * np.pi / 3, np.pi / 2, np.pi / 3])


def test_dictionary_columns_unit_norm_and_modulus():
    d = build_dictionary(8, 36)
    assert np.allclose(np.linalg.norm(d.matrix, axis=0), 1.0, atol=1e-12)
    assert np.allclose(np.abs(d.matrix), 1 / np.sqrt(8), atol=1e-12)


def test_dictionary_coherence_below_one():
    d = build_dictionary(8, 36)
    # off-diagonal Gram magnitudes computed the slow way
    worst = 0.0
    for i in range(36):
        for j in range(36):
            if i != j:
                worst = max(worst, abs(np.vdot(d.matrix[:, i], d.matrix[:, j])))
    assert worst < 1.0
    assert mutual_coherence(d.matrix) == pytest.approx(worst, abs=1e-12)


def test_dictionary_requires_redundancy():
    with pytest.raises(ValueError):
        build_dictionary(8, 8)


def test_vec_invec_roundtrip(rng):
    for rows, cols in [(1, 1), (3, 5), (8, 2)]:
        m = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
        assert np.array_equal(invec(vec(m), rows, cols), m)


def test_on_grid_identity(rng):
    dict_tx = build_dictionary(16, 20)
    dict_rx = build_dictionary(8, 12)
    ch = sample_channel(dict_tx, dict_rx, 4, rng)
    rebuilt = dict_rx.matrix @ invec(ch.angular_vector, 12, 20) @ dict_tx.matrix.conj().T
    assert np.linalg.norm(ch.dense - rebuilt) <= 1e-12 * np.linalg.norm(ch.dense)


def test_single_path_rank_one(rng):
    dict_tx = build_dictionary(16, 20)
    dict_rx = build_dictionary(8, 12)
    ch = sample_channel(dict_tx, dict_rx, 1, rng, gains=np.array([1.0 + 0j]))
    a_r = dict_rx.matrix[:, ch.aoa_indices[0]]
    a_t = dict_tx.matrix[:, ch.aod_indices[0]]
    expected = np.sqrt(16 * 8) * np.outer(a_r, a_t.conj())
    assert np.allclose(ch.dense, expected, atol=1e-12)
    assert np.linalg.matrix_rank(ch.dense) == 1


def test_sparsity_count(rng):
    dict_tx = build_dictionary(16, 20)
    dict_rx = build_dictionary(8, 12)
    for paths in (1, 2, 5):
        ch = sample_channel(dict_tx, dict_rx, paths, rng)
        assert np.count_nonzero(ch.angular_vector) == paths


def test_deterministic_given_seed():
    dict_tx = build_dictionary(16, 20)
    dict_rx = build_dictionary(8, 12)
    a = sample_channel(dict_tx, dict_rx, 3, np.random.default_rng(9))
    b = sample_channel(dict_tx, dict_rx, 3, np.random.default_rng(9))
    assert np.array_equal(a.dense, b.dense)
    assert np.array_equal(a.angular_vector, b.angular_vector)
    assert np.array_equal(a.aoa_indices, b.aoa_indices)


def test_gain_variance(rng):
    dict_tx = build_dictionary(4, 6)
    dict_rx = build_dictionary(4, 6)
    paths = 4
    draws = []
    for _ in range(2500):
        ch = sample_channel(dict_tx, dict_rx, paths, rng)
        draws.extend(ch.gains)
    var = np.mean(np.abs(np.array(draws)) ** 2)
    assert abs(var - 1.0 / paths) < 0.05 / paths


def test_rejects_zero_paths(rng):
    dict_tx = build_dictionary(4, 6)
    with pytest.raises(ValueError):
        sample_channel(dict_tx, dict_tx, 0, rng)


def test_off_grid_mode(rng):
    dict_tx = build_dictionary(8, 10)
    dict_rx = build_dictionary(8, 10)
    ch = sample_channel(dict_tx, dict_rx, 2, rng, mode="off_grid")
    assert ch.angular_vector is None
    assert ch.dense.shape == (8, 8)
    assert np.all((ch.aoa_indices >= 0) & (ch.aoa_indices <= np.pi))
