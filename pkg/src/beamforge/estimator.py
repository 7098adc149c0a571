"""Measurement synthesis, OMP sparse recovery, and channel-estimation scoring."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, invec, vec
from .hybrid import HybridSensingMatrix
from .metrics import equivalent_dictionary_from_combined


def _combined(side) -> np.ndarray:
    """The N x T combined factor of one side (hybrid or full-digital array)."""
    if isinstance(side, HybridSensingMatrix):
        return side.combined
    return np.asarray(side)


@dataclass
class MeasurementSet:
    """Vectorized training observations along with the dictionary they live in."""

    observations: np.ndarray
    equivalent_dictionary: np.ndarray
    pilot_power: float
    noise_variance: float

    @property
    def pnr_db(self) -> float:
        if self.noise_variance == 0.0:
            return float("inf")
        return 10.0 * np.log10(self.pilot_power / self.noise_variance)


def synthesize_measurements(
    channel: ChannelRealization,
    tx,
    rx,
    pilot_power: float,
    noise_variance: float,
    rng: np.random.Generator,
) -> MeasurementSet:
    """Aggregate noisy training observations: y = sqrt(P) Q h + vec(W^H N).

    The raw noise N (one i.i.d. CN(0, sigma^2) column per transmit beam) is
    passed through the receive combiner, so the equivalent noise on y is
    colored whenever the combiner is not orthonormal.  ``tx``/``rx`` may be
    HybridSensingMatrix instances or plain N x T combined matrices.
    """
    if pilot_power < 0.0 or noise_variance < 0.0:
        raise ValueError("pilot power and noise variance must be non-negative")
    tx_combined = _combined(tx)
    rx_combined = _combined(rx)
    n_r, t_r = rx_combined.shape
    n_t, t_t = tx_combined.shape
    if channel.dense.shape != (n_r, n_t):
        raise ValueError("channel dimensions do not match the sensing matrices")

    signal = np.sqrt(pilot_power) * (rx_combined.conj().T @ channel.dense @ tx_combined)
    if noise_variance > 0.0:
        raw = (
            rng.standard_normal((n_r, t_t)) + 1j * rng.standard_normal((n_r, t_t))
        ) * np.sqrt(noise_variance / 2.0)
        noise = rx_combined.conj().T @ raw
    else:
        noise = np.zeros((t_r, t_t))
    y = vec(signal + noise)

    q = equivalent_dictionary_from_combined(
        tx_combined, rx_combined, channel.dict_tx.matrix, channel.dict_rx.matrix
    )
    return MeasurementSet(
        observations=y,
        equivalent_dictionary=q,
        pilot_power=pilot_power,
        noise_variance=noise_variance,
    )


@dataclass
class EstimateReport:
    """Recovered sparse channel and its accuracy scores."""

    recovered_angular: np.ndarray
    recovered_support: list[int]
    dense_estimate: np.ndarray
    nmse_linear: float
    nmse_db: float
    omp_converged: bool


def omp_recover(
    q: np.ndarray,
    y: np.ndarray,
    sparsity: int,
    residual_tolerance: float = 1e-6,
) -> tuple[np.ndarray, list[int], bool]:
    """Orthogonal matching pursuit with a genie-aided sparsity budget.

    Selects the column of the column-normalized dictionary most correlated
    with the residual, re-fits by least squares on the support, and repeats
    until ``sparsity`` atoms are chosen or the residual drops below
    residual_tolerance * ||y||.  Coefficients are reported against the
    original (unnormalized) columns.  Returns (coefficients, support,
    converged); ``converged`` is False when the support's normal equations
    went numerically singular and the loop stopped early.
    """
    if sparsity < 1:
        raise ValueError("sparsity must be >= 1")
    q = np.asarray(q)
    y = np.asarray(y)
    norms = np.linalg.norm(q, axis=0)
    safe_norms = np.where(norms > 0.0, norms, 1.0)

    x = np.zeros(q.shape[1], dtype=complex)
    support: list[int] = []
    residual = y.copy()
    y_norm = np.linalg.norm(y)
    if y_norm == 0.0:
        return x, support, True

    coeffs = np.zeros(0, dtype=complex)
    for _ in range(sparsity):
        if np.linalg.norm(residual) <= residual_tolerance * y_norm:
            break
        correlations = np.abs(q.conj().T @ residual) / safe_norms
        correlations[support] = -1.0
        atom = int(np.argmax(correlations))
        support.append(atom)
        sub = q[:, support]
        try:
            new_coeffs, _, rank, _ = np.linalg.lstsq(sub, y, rcond=None)
        except np.linalg.LinAlgError:
            rank = -1
        if rank < len(support):
            # Singular support: back the atom out and stop with what we have.
            support.pop()
            x[support] = coeffs
            return x, support, False
        coeffs = new_coeffs
        residual = y - sub @ coeffs

    x[support] = coeffs
    return x, support, True


def reconstruct_channel(
    angular_estimate: np.ndarray, a_rx: np.ndarray, a_tx: np.ndarray
) -> np.ndarray:
    """Dense channel from the angular-domain estimate: A_R invec(h) A_T^H."""
    a_rx = np.asarray(a_rx)
    a_tx = np.asarray(a_tx)
    h_mat = invec(angular_estimate, a_rx.shape[1], a_tx.shape[1])
    return a_rx @ h_mat @ a_tx.conj().T


def nmse(h_true: np.ndarray, h_est: np.ndarray) -> tuple[float, float]:
    """Per-realization normalized squared error, linear and in dB.

    The harness averages the linear ratios over trials before taking dB, so
    the expectation sits inside the logarithm.  A perfect estimate reports
    -inf dB.
    """
    denom = np.linalg.norm(h_true, "fro") ** 2
    if denom == 0.0:
        raise ValueError("true channel is zero; NMSE undefined")
    linear = float(np.linalg.norm(h_true - h_est, "fro") ** 2 / denom)
    db = 10.0 * np.log10(linear) if linear > 0.0 else float("-inf")
    return linear, db


def estimate_channel(
    measurements: MeasurementSet,
    a_tx: np.ndarray,
    a_rx: np.ndarray,
    sparsity: int,
    h_true: np.ndarray,
    residual_tolerance: float = 1e-6,
) -> EstimateReport:
    """Run OMP on a measurement set and score the dense reconstruction."""
    scaled = np.sqrt(measurements.pilot_power) * measurements.equivalent_dictionary
    x_hat, support, converged = omp_recover(
        scaled, measurements.observations, sparsity, residual_tolerance
    )
    dense = reconstruct_channel(x_hat, a_rx, a_tx)
    linear, db = nmse(h_true, dense)
    return EstimateReport(
        recovered_angular=x_hat,
        recovered_support=support,
        dense_estimate=dense,
        nmse_linear=linear,
        nmse_db=db,
        omp_converged=converged,
    )


def spectral_efficiency(
    h_true: np.ndarray,
    h_est: np.ndarray,
    data_power: float,
    num_streams: int,
    noise_variance: float,
) -> float:
    """Achievable rate of SVD precoding designed on the estimated channel.

    The precoder/combiner are the top singular vectors of ``h_est``; the rate
    is evaluated on the true channel:
    log2 |I + (P / (N_s sigma^2)) (W^H W)^-1 W^H H F F^H H^H W|.
    """
    h_est = np.asarray(h_est)
    u, _, vh = np.linalg.svd(h_est)
    f = vh.conj().T[:, :num_streams]
    w = u[:, :num_streams]
    whw = w.conj().T @ w
    try:
        whw_inv = np.linalg.inv(whw)
    except np.linalg.LinAlgError:
        whw_inv = np.linalg.inv(whw + 1e-12 * np.eye(num_streams))
    effective = w.conj().T @ h_true @ f
    inner = (data_power / (num_streams * noise_variance)) * (
        whw_inv @ effective @ effective.conj().T
    )
    sign, logdet = np.linalg.slogdet(np.eye(num_streams) + inner)
    if sign.real <= 0.0:
        return 0.0
    return float(logdet / np.log(2.0))
