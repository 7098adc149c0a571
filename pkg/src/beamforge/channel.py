"""ULA steering vectors, angular grid dictionaries, and sparse channel draws.

The angular grid is non-uniform in angle but uniform in cosine, which keeps
the dictionary columns maximally spread for a given grid size.  All matrix
vectorization in this package is column-major (``vec``/``invec`` below), so
that vec(A B C) = (C^T kron A) vec(B) holds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def vec(matrix: np.ndarray) -> np.ndarray:
    """Column-major vectorization of a matrix."""
    return np.asarray(matrix).reshape(-1, order="F")


def invec(vector: np.ndarray, num_rows: int, num_cols: int) -> np.ndarray:
    """Inverse of :func:`vec`: reshape a vector back to a matrix."""
    vector = np.asarray(vector)
    if vector.size != num_rows * num_cols:
        raise ValueError(
            f"cannot reshape length-{vector.size} vector to {num_rows}x{num_cols}"
        )
    return vector.reshape(num_rows, num_cols, order="F")


def steering_vector(num_antennas: int, angle: float, spacing_ratio: float = 0.5) -> np.ndarray:
    """Unit-norm ULA array response for a given azimuth angle.

    Element n (0-based) is (1/sqrt(N)) * exp(j*2*pi*spacing_ratio*n*cos(angle)).
    """
    if num_antennas < 1:
        raise ValueError("num_antennas must be >= 1")
    if not np.isfinite(angle):
        raise ValueError("angle must be finite")
    n = np.arange(num_antennas)
    phase = 2.0 * np.pi * spacing_ratio * np.cos(angle)
    return np.exp(1j * phase * n) / np.sqrt(num_antennas)


@dataclass(frozen=True)
class AngularDictionary:
    """Grid of steering vectors used as the sparsifying basis for one array side.

    ``matrix`` is N x G with unit-norm columns; the cosine of the grid angles
    is uniformly spaced: cos(grid_angles[g]) = 2*g/G - 1 for g = 0..G-1.
    """

    num_antennas: int
    num_grids: int
    grid_angles: np.ndarray
    matrix: np.ndarray
    element_spacing_ratio: float = 0.5


def build_dictionary(num_antennas: int, num_grids: int, spacing_ratio: float = 0.5) -> AngularDictionary:
    """Build the cosine-uniform angular dictionary for a ULA.

    Requires num_grids > num_antennas so the on-grid channel representation is
    genuinely redundant (more atoms than array elements).
    """
    if num_grids <= num_antennas:
        raise ValueError(
            f"num_grids ({num_grids}) must exceed num_antennas ({num_antennas})"
        )
    grid_cos = 2.0 * np.arange(num_grids) / num_grids - 1.0
    grid_angles = np.arccos(grid_cos)
    columns = [steering_vector(num_antennas, a, spacing_ratio) for a in grid_angles]
    matrix = np.stack(columns, axis=1)
    return AngularDictionary(
        num_antennas=num_antennas,
        num_grids=num_grids,
        grid_angles=grid_angles,
        matrix=matrix,
        element_spacing_ratio=spacing_ratio,
    )


@dataclass
class ChannelRealization:
    """One sparse multipath channel draw with its ground truth.

    In on-grid mode ``dense`` equals A_R @ invec(angular_vector) @ A_T^H
    exactly and the angular vector has num_paths nonzeros; in off-grid mode
    the angles are continuous and ``angular_vector`` is None.  The draw keeps
    references to the dictionaries it was sampled against so downstream code
    can build the equivalent sparse-recovery dictionary.
    """

    num_tx: int
    num_rx: int
    num_paths: int
    gains: np.ndarray
    aod_indices: np.ndarray
    aoa_indices: np.ndarray
    dense: np.ndarray
    angular_vector: np.ndarray | None
    dict_tx: "AngularDictionary"
    dict_rx: "AngularDictionary"


def sample_channel(
    dict_tx: AngularDictionary,
    dict_rx: AngularDictionary,
    num_paths: int,
    rng: np.random.Generator,
    mode: str = "on_grid",
    gains: np.ndarray | None = None,
) -> ChannelRealization:
    """Draw a sparse multipath channel with known support.

    Path gains are CN(0, 1/L) unless ``gains`` overrides them (used by tests
    that pin a deterministic single path).  On-grid mode draws L distinct
    (AoD, AoA) grid pairs uniformly; off-grid mode draws continuous angles
    uniform in [0, pi].
    """
    if num_paths < 1:
        raise ValueError("num_paths must be >= 1")
    if mode not in ("on_grid", "off_grid"):
        raise ValueError(f"unknown mode {mode!r}")
    g_t, g_r = dict_tx.num_grids, dict_rx.num_grids
    if num_paths > min(g_t, g_r):
        raise ValueError("num_paths exceeds grid size")
    n_t, n_r = dict_tx.num_antennas, dict_rx.num_antennas

    if gains is None:
        gains = (
            rng.standard_normal(num_paths) + 1j * rng.standard_normal(num_paths)
        ) * np.sqrt(1.0 / (2.0 * num_paths))
    else:
        gains = np.asarray(gains, dtype=complex)
        if gains.shape != (num_paths,):
            raise ValueError("gains must have one entry per path")

    scale = np.sqrt(n_t * n_r / num_paths)

    if mode == "on_grid":
        # Distinct (AoD, AoA) pairs via rejection: coinciding paths would
        # collapse the sparsity below L.
        pairs: set[tuple[int, int]] = set()
        while len(pairs) < num_paths:
            pairs.add((int(rng.integers(g_t)), int(rng.integers(g_r))))
        pair_list = sorted(pairs)
        rng.shuffle(pair_list)
        aod = np.array([p[0] for p in pair_list])
        aoa = np.array([p[1] for p in pair_list])
        angular_matrix = np.zeros((g_r, g_t), dtype=complex)
        angular_matrix[aoa, aod] = scale * gains
        dense = dict_rx.matrix @ angular_matrix @ dict_tx.matrix.conj().T
        return ChannelRealization(
            num_tx=n_t,
            num_rx=n_r,
            num_paths=num_paths,
            gains=gains,
            aod_indices=aod,
            aoa_indices=aoa,
            dense=dense,
            angular_vector=vec(angular_matrix),
            dict_tx=dict_tx,
            dict_rx=dict_rx,
        )

    aod_angles = rng.uniform(0.0, np.pi, num_paths)
    aoa_angles = rng.uniform(0.0, np.pi, num_paths)
    dense = np.zeros((n_r, n_t), dtype=complex)
    for l in range(num_paths):
        a_r = steering_vector(n_r, aoa_angles[l], dict_rx.element_spacing_ratio)
        a_t = steering_vector(n_t, aod_angles[l], dict_tx.element_spacing_ratio)
        dense += scale * gains[l] * np.outer(a_r, a_t.conj())
    return ChannelRealization(
        num_tx=n_t,
        num_rx=n_r,
        num_paths=num_paths,
        gains=gains,
        aod_indices=aod_angles,
        aoa_indices=aoa_angles,
        dense=dense,
        angular_vector=None,
        dict_tx=dict_tx,
        dict_rx=dict_rx,
    )
