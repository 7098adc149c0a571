"""Alternating hybrid design under infinite-resolution phase shifters.

The digital part is found through a convex reformulation: with the analog
part fixed, the Gram residual is a convex quadratic in the per-block PSD
variables X_q = W_q W_q^H, minimized here by projected gradient descent on
the PSD cone (no external solver).  The digital blocks are then recovered
from the strongest eigenpairs of each X_q.  The analog part is optimized on
the product-of-circles manifold with the conjugate-gradient engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import AngularDictionary, invec, vec
from .hybrid import HybridSensingMatrix, block_diag, normalize_power
from .manifold_opt import CgOptions, cg_minimize
from .metrics import gram_objective

PSD_MAX_ITERATIONS = 5000
PSD_KKT_RELATIVE = 1e-5


def _dict_matrix(dictionary) -> np.ndarray:
    if isinstance(dictionary, AngularDictionary):
        return dictionary.matrix
    return np.asarray(dictionary)


def project_psd(matrix: np.ndarray) -> np.ndarray:
    """Nearest PSD matrix: symmetrize, then clip negative eigenvalues."""
    sym = 0.5 * (matrix + matrix.conj().T)
    vals, vecs = np.linalg.eigh(sym)
    vals = np.clip(vals, 0.0, None)
    return (vecs * vals) @ vecs.conj().T


@dataclass
class PsdBlockVariable:
    """Solution of the per-block PSD relaxation of the digital subproblem."""

    blocks: list[np.ndarray]
    objective: float
    converged: bool
    kkt_residual: float


def _split_analog(analog: np.ndarray, num_blocks: int) -> list[np.ndarray]:
    if analog.shape[1] % num_blocks != 0:
        raise ValueError("analog column count is not divisible by num_blocks")
    n_rf = analog.shape[1] // num_blocks
    return [analog[:, q * n_rf : (q + 1) * n_rf] for q in range(num_blocks)]


def solve_digital_psd(
    dictionary,
    analog: np.ndarray,
    num_blocks: int,
    initial_blocks: list[np.ndarray] | None = None,
    max_iterations: int = PSD_MAX_ITERATIONS,
) -> PsdBlockVariable:
    """Minimize ||sum_q B_q X_q B_q^H - I||_F^2 over PSD blocks X_q.

    B_q = A^H W_q maps each block's PSD variable into the Gram residual.
    Projected gradient descent with a backtracked step; the iteration is
    monotone from ``initial_blocks`` (zero blocks when omitted), and stops
    once the projected-gradient norm falls below 1e-5 of the initial
    gradient norm.
    """
    a = _dict_matrix(dictionary)
    g = a.shape[1]
    analog_blocks = _split_analog(np.asarray(analog), num_blocks)
    n_rf = analog_blocks[0].shape[1]
    # maps stacked as (num_blocks, G, n_rf) so the per-block products batch
    b = np.stack([a.conj().T @ w for w in analog_blocks])

    if initial_blocks is None:
        x = np.zeros((num_blocks, n_rf, n_rf), dtype=complex)
    else:
        x = np.stack([project_psd(np.asarray(blk)) for blk in initial_blocks])

    eye = np.eye(g)

    def residual(xs):
        return np.einsum("qgi,qij,qhj->gh", b, xs, b.conj()) - eye

    def objective(xs):
        return float(np.linalg.norm(residual(xs), "fro") ** 2)

    def gradient(xs):
        s = residual(xs)
        return 2.0 * np.einsum("qgi,gh,qhj->qij", b.conj(), s, b)

    def project_all(xs):
        sym = 0.5 * (xs + np.conj(np.swapaxes(xs, 1, 2)))
        vals, vecs = np.linalg.eigh(sym)
        vals = np.clip(vals, 0.0, None)
        return np.einsum("qij,qj,qkj->qik", vecs, vals, vecs.conj())

    f_x = objective(x)
    grad = gradient(x)
    initial_grad_norm = np.linalg.norm(grad)
    if initial_grad_norm == 0.0:
        return PsdBlockVariable(list(x), f_x, True, 0.0)
    target = PSD_KKT_RELATIVE * initial_grad_norm

    step = 1.0 / max(np.linalg.norm(np.einsum("qgi,qhi->qgh", b, b.conj())), 1e-12)
    converged = False
    kkt = np.inf
    for _ in range(max_iterations):
        # Backtrack until the quadratic upper-bound condition holds.
        for _ in range(60):
            x_new = project_all(x - step * grad)
            diff = x_new - x
            diff_sq = float(np.linalg.norm(diff) ** 2)
            f_new = objective(x_new)
            bound = f_x + float(np.vdot(grad, diff).real) + diff_sq / (2.0 * step)
            if f_new <= bound + 1e-15 * max(1.0, abs(f_x)):
                break
            step *= 0.5
        kkt = np.sqrt(diff_sq) / step
        if f_new <= f_x:
            x, f_x = x_new, f_new
        grad = gradient(x)
        if kkt <= target:
            converged = True
            break
        step *= 1.2
    return PsdBlockVariable(list(x), f_x, converged, float(kkt))


def extract_digital(block: np.ndarray, num_streams: int) -> np.ndarray:
    """Digital block from the strongest eigenpairs of a PSD variable.

    Returns W = V * sqrt(diag(lambda)) over the top ``num_streams``
    eigenpairs; W @ W^H is the best rank-num_streams PSD approximation of
    the block (W itself is unique only up to a right unitary factor).
    """
    block = np.asarray(block)
    vals, vecs = np.linalg.eigh(0.5 * (block + block.conj().T))
    if vals[0] < -1e-8:
        raise ValueError(f"block is not PSD (min eigenvalue {vals[0]:.3e})")
    vals = np.clip(vals, 0.0, None)
    order = np.argsort(vals)[::-1][:num_streams]
    return vecs[:, order] * np.sqrt(vals[order])


def analog_cost_inf(x: np.ndarray, digital: np.ndarray, dictionary) -> float:
    """Gram residual as a function of the flattened analog matrix."""
    a = _dict_matrix(dictionary)
    w = invec(x, a.shape[0], digital.shape[0])
    factor = a.conj().T @ w @ digital
    g = a.shape[1]
    return float(np.linalg.norm(factor @ factor.conj().T - np.eye(g), "fro") ** 2)


def egrad_analog_inf(x: np.ndarray, digital: np.ndarray, dictionary) -> np.ndarray:
    """Euclidean gradient of :func:`analog_cost_inf` (flattened)."""
    a = _dict_matrix(dictionary)
    m = digital.shape[0]
    w = invec(x, a.shape[0], m)
    c = digital @ digital.conj().T
    aah = a @ a.conj().T
    t1 = aah @ w @ c
    inner = w.conj().T @ t1 - np.eye(m)
    return 4.0 * vec(t1 @ inner)


@dataclass
class InfDesignOptions:
    """Outer-loop knobs for :func:`design_hybrid_inf`."""

    max_outer_iterations: int = 50
    relative_tolerance: float = 1e-6
    cg_options: CgOptions = field(default_factory=CgOptions)


def design_hybrid_inf(
    dictionary: AngularDictionary,
    num_blocks: int,
    num_rf_chains: int,
    num_streams: int,
    rng: np.random.Generator,
    options: InfDesignOptions | None = None,
    side: str = "receiver",
) -> HybridSensingMatrix:
    """Alternating digital/analog design with continuous phases.

    Starts from a random-phase analog matrix, alternates the convex digital
    step (PSD solve + eigen extraction) with the manifold analog step, and
    finishes by scaling the digital part to the power constraint.  The
    returned ``objective_trace`` is non-increasing across outer iterations.
    """
    if num_streams > num_rf_chains:
        raise ValueError("num_streams must not exceed num_rf_chains")
    options = options or InfDesignOptions()
    a = dictionary.matrix
    n = dictionary.num_antennas
    m = num_rf_chains * num_blocks

    analog = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, (n, m)))
    digital_blocks: list[np.ndarray] | None = None
    current = math.inf
    trace: list[float] = []

    for _ in range(options.max_outer_iterations):
        warm = None
        if digital_blocks is not None:
            warm = [w @ w.conj().T for w in digital_blocks]
        psd = solve_digital_psd(a, analog, num_blocks, initial_blocks=warm)
        candidate_blocks = [extract_digital(x, num_streams) for x in psd.blocks]
        candidate_obj = gram_objective(a, analog, block_diag(candidate_blocks))
        # Eigen extraction can lose ground when num_streams < num_rf_chains;
        # keep the previous digital part in that case so the outer objective
        # never increases.
        if digital_blocks is None or candidate_obj <= current:
            digital_blocks = candidate_blocks
        digital = block_diag(digital_blocks)

        x, _ = cg_minimize(
            lambda xv: analog_cost_inf(xv, digital, a),
            lambda xv: egrad_analog_inf(xv, digital, a),
            vec(analog),
            options.cg_options,
        )
        analog = invec(x, n, m)

        previous = current
        current = gram_objective(a, analog, digital)
        trace.append(current)
        if math.isfinite(previous) and previous - current <= options.relative_tolerance * max(
            previous, 1e-300
        ):
            break

    hybrid = HybridSensingMatrix(
        analog=analog,
        digital_blocks=digital_blocks,
        resolution_bits=math.inf,
        side=side,
        objective_trace=trace,
        design_objective=trace[-1],
    )
    return normalize_power(hybrid)
