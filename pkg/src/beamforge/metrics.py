"""Coherence and Gram-matrix machinery shared by the designers and the harness."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _column_normalized(dictionary: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(dictionary, axis=0)
    if np.any(norms == 0.0):
        raise ValueError("dictionary has an all-zero column")
    return dictionary / norms


def offdiag_magnitudes(dictionary: np.ndarray) -> np.ndarray:
    """Magnitudes of the off-diagonal entries of the column-normalized Gram."""
    dictionary = np.asarray(dictionary)
    if dictionary.shape[1] < 2:
        raise ValueError("need at least two columns")
    normalized = _column_normalized(dictionary)
    gram = normalized.conj().T @ normalized
    g = gram.shape[0]
    mask = ~np.eye(g, dtype=bool)
    return np.abs(gram[mask])


def mutual_coherence(dictionary: np.ndarray) -> float:
    """Largest normalized inner product between distinct columns."""
    mags = offdiag_magnitudes(dictionary)
    return float(min(mags.max(), 1.0))


def gram_objective(dict_matrix: np.ndarray, analog: np.ndarray, digital: np.ndarray) -> float:
    """|| A^H W_RF W_BB W_BB^H W_RF^H A - I ||_F^2 for one side's factors."""
    dict_matrix = np.asarray(dict_matrix)
    combined = np.asarray(analog) @ np.asarray(digital)
    factor = dict_matrix.conj().T @ combined
    g = dict_matrix.shape[1]
    gram = factor @ factor.conj().T
    return float(np.linalg.norm(gram - np.eye(g), "fro") ** 2)


def equivalent_dictionary(
    f_rf: np.ndarray,
    f_bb: np.ndarray,
    w_rf: np.ndarray,
    w_bb: np.ndarray,
    a_tx: np.ndarray,
    a_rx: np.ndarray,
) -> np.ndarray:
    """Kronecker-structured dictionary the sparse recovery operates on.

    Q = (F_BB^T F_RF^T A_T^*) kron (W_BB^H W_RF^H A_R), sized
    (T_t T_r) x (G_t G_r).
    """
    tx_combined = np.asarray(f_rf) @ np.asarray(f_bb)
    rx_combined = np.asarray(w_rf) @ np.asarray(w_bb)
    return equivalent_dictionary_from_combined(tx_combined, rx_combined, a_tx, a_rx)


def equivalent_dictionary_from_combined(
    tx_combined: np.ndarray,
    rx_combined: np.ndarray,
    a_tx: np.ndarray,
    a_rx: np.ndarray,
) -> np.ndarray:
    """Same as :func:`equivalent_dictionary` from the N x T combined products."""
    tx_factor = tx_combined.T @ np.asarray(a_tx).conj()
    rx_factor = rx_combined.conj().T @ np.asarray(a_rx)
    return np.kron(tx_factor, rx_factor)


def scaled_identity_objective(q: np.ndarray) -> tuple[float, float]:
    """Optimal identity-scaling coefficient and the scaled Gram residual.

    Returns (zeta, value) with zeta = Tr{Q^H Q} / Tr{(Q^H Q)^2} and
    value = ||zeta * Q^H Q - I||_F^2.  zeta is the stationary point of the
    value over all positive scalings, so the value is scale-invariant in Q.
    """
    q = np.asarray(q)
    gram = q.conj().T @ q
    numer = np.trace(gram).real
    denom = np.trace(gram @ gram).real
    if denom <= 0.0:
        raise ValueError("zero matrix has no identity scaling")
    zeta = float(numer / denom)
    g = gram.shape[0]
    value = float(np.linalg.norm(zeta * gram - np.eye(g), "fro") ** 2)
    return zeta, value


def offdiag_histogram(dictionary: np.ndarray, num_bins: int) -> tuple[np.ndarray, np.ndarray]:
    """Histogram of off-diagonal coherences over uniform bins spanning [0, 1].

    Columns are normalized before the Gram is formed.  Bins are half-open
    [lo, hi) with the last bin closed so a coherence of exactly 1 is counted.
    Returns (counts, bin_edges) following the numpy.histogram convention.
    """
    if num_bins < 1:
        raise ValueError("num_bins must be >= 1")
    mags = offdiag_magnitudes(dictionary)
    edges = np.linspace(0.0, 1.0, num_bins + 1)
    counts, _ = np.histogram(np.clip(mags, 0.0, 1.0), bins=edges)
    return counts, edges


@dataclass(frozen=True)
class GramSummary:
    """Coherence statistics of one dictionary, as plotted by the harness."""

    max_offdiag_coherence: float
    offdiag_magnitudes: np.ndarray
    objective_value: float
    dimension: int


def summarize_gram(dictionary: np.ndarray) -> GramSummary:
    """Collect coherence statistics and the unnormalized Gram residual."""
    dictionary = np.asarray(dictionary)
    mags = offdiag_magnitudes(dictionary)
    g = dictionary.shape[1]
    gram = dictionary.conj().T @ dictionary
    objective = float(np.linalg.norm(gram - np.eye(g), "fro") ** 2)
    return GramSummary(
        max_offdiag_coherence=float(min(mags.max(), 1.0)),
        offdiag_magnitudes=mags,
        objective_value=objective,
        dimension=g,
    )
