"""Block-wise alternating hybrid design under low-resolution phase shifters.

Quantizing the whole analog matrix at once is too destructive at 1-3 bits,
so the Gram-residual objective is split into per-block subproblems against a
residual target E_q that accounts for every other block.  Each block visit
alternates an adaptive-stepsize gradient descent on the digital sub-block
with a continuous-phase manifold step on the analog sub-block, quantizes the
analog result, re-fits the digital part, and commits the block only if the
global objective actually decreased (the judgment step).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import AngularDictionary, invec, vec
from .hybrid import (
    HybridSensingMatrix,
    PhaseSet,
    block_diag,
    normalize_power,
    quantize_phases,
)
from .manifold_opt import CgOptions, cg_minimize

MAX_STEP_HALVINGS = 60


def _dict_matrix(dictionary) -> np.ndarray:
    if isinstance(dictionary, AngularDictionary):
        return dictionary.matrix
    return np.asarray(dictionary)


def residual_target(dictionary, hybrid: HybridSensingMatrix, skip_block: int) -> np.ndarray:
    """Hermitian target E_q = I - sum of every other block's Gram contribution.

    ``skip_block`` is a 0-based block index.
    """
    a = _dict_matrix(dictionary)
    g = a.shape[1]
    if not 0 <= skip_block < hybrid.num_blocks:
        raise IndexError(f"block index {skip_block} out of range")
    target = np.eye(g, dtype=complex)
    for t in range(hybrid.num_blocks):
        if t == skip_block:
            continue
        factor = a.conj().T @ hybrid.analog_block(t) @ hybrid.digital_blocks[t]
        target -= factor @ factor.conj().T
    return target


def digital_block_objective(w: np.ndarray, a_eq: np.ndarray, e_target: np.ndarray) -> float:
    """J = || A_E^H W W^H A_E - E_q ||_F^2 for one digital sub-block."""
    s = a_eq.conj().T @ w @ w.conj().T @ a_eq - e_target
    return float(np.linalg.norm(s, "fro") ** 2)


def digital_gradient(w: np.ndarray, a_eq: np.ndarray, e_target: np.ndarray) -> np.ndarray:
    """Gradient of :func:`digital_block_objective` with respect to W."""
    s = a_eq.conj().T @ w @ w.conj().T @ a_eq - e_target
    return 4.0 * (a_eq @ s @ a_eq.conj().T @ w)


@dataclass
class GammaWorkspace:
    """Intermediates of the stepsize polynomial, built once per iterate.

    gamma1, gamma2 and gamma3 are Hermitian; gamma4 is not in general.
    """

    gamma1: np.ndarray
    gamma2: np.ndarray
    gamma3: np.ndarray
    gamma4: np.ndarray


def build_gamma_workspace(w: np.ndarray, a_eq: np.ndarray, e_target: np.ndarray) -> GammaWorkspace:
    s = a_eq.conj().T @ w @ w.conj().T @ a_eq - e_target
    wwh = w @ w.conj().T
    gamma1 = a_eq @ s @ a_eq.conj().T
    gamma2 = a_eq.conj().T @ gamma1 @ wwh @ gamma1 @ a_eq
    gamma3 = gamma1 @ wwh + wwh @ gamma1
    gamma4 = a_eq.conj().T @ gamma1 @ wwh @ a_eq
    return GammaWorkspace(gamma1=gamma1, gamma2=gamma2, gamma3=gamma3, gamma4=gamma4)


def _stepsize_coefficients(
    w: np.ndarray, a_eq: np.ndarray, e_target: np.ndarray, workspace: GammaWorkspace
) -> tuple[float, float, float, float]:
    """Coefficients (c0, c1, c2, c3) of dJ/d(eta) along W - eta * Gamma1 @ W.

    Expanding J(W - eta * Gamma1 W) gives a quartic in eta whose derivative
    is the cubic returned here; the step direction Gamma1 @ W is one quarter
    of :func:`digital_gradient`.
    """
    s = a_eq.conj().T @ w @ w.conj().T @ a_eq - e_target
    t3 = a_eq.conj().T @ workspace.gamma3 @ a_eq
    g2 = workspace.gamma2
    c3 = 4.0 * float(np.trace(g2 @ g2).real)
    c2 = -6.0 * float(np.trace(t3 @ g2).real)
    c1 = 2.0 * (float(np.trace(t3 @ t3).real) + 2.0 * float(np.trace(s @ g2).real))
    c0 = -2.0 * float(np.trace(s @ t3).real)
    return c0, c1, c2, c3


def stepsize_derivative(
    eta: float,
    w: np.ndarray,
    a_eq: np.ndarray,
    e_target: np.ndarray,
    workspace: GammaWorkspace,
) -> float:
    """dJ/d(eta) of the update W(eta) = W - eta * Gamma1 @ W.

    Used to adapt the descent stepsize: a positive value means the last step
    overshot the 1-D minimum along the descent ray, a negative one that a
    larger step would have reduced J further.
    """
    c0, c1, c2, c3 = _stepsize_coefficients(w, a_eq, e_target, workspace)
    return ((c3 * eta + c2) * eta + c1) * eta + c0


@dataclass
class GdOptions:
    """Knobs of the adaptive gradient descent for digital sub-blocks.

    ``initial_step`` of None picks the exact minimizer of the first
    iteration's 1-D step polynomial, which keeps the descent well scaled
    regardless of the data magnitude.
    """

    initial_step: float | None = None
    meta_step: float = 1e-3
    max_iterations: int = 300
    relative_tolerance: float = 1e-8


def _best_step(c0: float, c1: float, c2: float, c3: float) -> float | None:
    """Positive stationary point of the step polynomial with the lowest J."""
    roots = np.roots([c3, c2, c1, c0]) if c3 != 0.0 else np.roots([c2, c1, c0])
    best = None
    best_val = np.inf
    for r in roots:
        if abs(r.imag) > 1e-9 * max(1.0, abs(r.real)) or r.real <= 0.0:
            continue
        eta = float(r.real)
        val = c0 * eta + c1 * eta**2 / 2.0 + c2 * eta**3 / 3.0 + c3 * eta**4 / 4.0
        if val < best_val:
            best, best_val = eta, val
    return best


def gd_digital_block(
    w0: np.ndarray,
    a_eq: np.ndarray,
    e_target: np.ndarray,
    options: GdOptions | None = None,
) -> np.ndarray:
    """Adaptive-stepsize gradient descent on one digital sub-block.

    The step eta adapts by eta <- eta - meta_step * dJ/d(eta), with halving
    whenever a step would increase J, so the objective is non-increasing and
    the returned J never exceeds J(w0).
    """
    options = options or GdOptions()
    w = np.asarray(w0, dtype=complex)
    j_current = digital_block_objective(w, a_eq, e_target)
    eta = options.initial_step

    for _ in range(options.max_iterations):
        workspace = build_gamma_workspace(w, a_eq, e_target)
        direction = workspace.gamma1 @ w
        dir_norm = np.linalg.norm(direction)
        if dir_norm == 0.0 or not np.isfinite(dir_norm):
            break
        c0, c1, c2, c3 = _stepsize_coefficients(w, a_eq, e_target, workspace)
        if eta is None:
            eta = _best_step(c0, c1, c2, c3) or 1e-3

        accepted = False
        for _ in range(MAX_STEP_HALVINGS):
            w_new = w - eta * direction
            j_new = digital_block_objective(w_new, a_eq, e_target)
            if j_new <= j_current:
                accepted = True
                break
            eta *= 0.5
        if not accepted:
            break

        derivative = ((c3 * eta + c2) * eta + c1) * eta + c0
        eta_next = eta - options.meta_step * derivative
        if np.isfinite(eta_next) and eta_next > 0.0:
            eta = eta_next

        decrease = j_current - j_new
        w, j_current = w_new, j_new
        if decrease <= options.relative_tolerance * max(j_current, 1e-300):
            break
    return w


def analog_block_cost(x: np.ndarray, w: np.ndarray, dictionary, e_target: np.ndarray) -> float:
    """Block Gram residual as a function of the flattened analog sub-block."""
    a = _dict_matrix(dictionary)
    w_rf = invec(x, a.shape[0], w.shape[0])
    factor = a.conj().T @ w_rf @ w
    return float(np.linalg.norm(factor @ factor.conj().T - e_target, "fro") ** 2)


def egrad_analog_block(
    x: np.ndarray, w: np.ndarray, dictionary, e_target: np.ndarray
) -> np.ndarray:
    """Euclidean gradient of :func:`analog_block_cost` (flattened)."""
    a = _dict_matrix(dictionary)
    w_rf = invec(x, a.shape[0], w.shape[0])
    c = w @ w.conj().T
    s = a.conj().T @ w_rf @ c @ w_rf.conj().T @ a - e_target
    return 4.0 * vec(a @ s @ a.conj().T @ w_rf @ c)


@dataclass
class LowDesignOptions:
    """Knobs for :func:`design_hybrid_low`.

    A visit counts as an effective update only when it improves the global
    objective by more than ``effective_relative_improvement`` (relative);
    smaller improvements are still committed but do not reset the
    consecutive-failure counter, so plateau churn terminates.
    """

    inner_max_iterations: int = 30
    inner_relative_tolerance: float = 1e-6
    effective_relative_improvement: float = 1e-4
    gd_options: GdOptions = field(default_factory=GdOptions)
    cg_options: CgOptions = field(default_factory=CgOptions)
    max_block_visits: int = 1000


def _block_objective_state(a, analog_blocks, digital_blocks, q, e_target) -> float:
    factor = a.conj().T @ analog_blocks[q] @ digital_blocks[q]
    return float(np.linalg.norm(factor @ factor.conj().T - e_target, "fro") ** 2)


def design_hybrid_low(
    dictionary: AngularDictionary,
    num_blocks: int,
    num_rf_chains: int,
    num_streams: int,
    phase_set: PhaseSet,
    rng: np.random.Generator,
    options: LowDesignOptions | None = None,
    side: str = "receiver",
) -> HybridSensingMatrix:
    """Round-robin block design with quantization and a commit-or-rollback test.

    The analog part starts from random alphabet phases and the digital blocks
    from complex Gaussian entries.  Each block visit refines its sub-block
    against the residual target of the others, quantizes the analog part,
    re-fits the digital part, and commits only on a strict decrease of the
    global objective.  The loop ends once ``num_blocks`` consecutive visits
    fail the judgment.  ``objective_trace`` holds the committed objective
    after the initial state and after each commit (strictly decreasing past
    the first entry).
    """
    if not phase_set.is_finite:
        raise ValueError("design_hybrid_low requires a finite phase set")
    if num_streams > num_rf_chains:
        raise ValueError("num_streams must not exceed num_rf_chains")
    options = options or LowDesignOptions()
    a = dictionary.matrix
    n = dictionary.num_antennas

    alphabet = phase_set.alphabet
    analog_blocks = [
        alphabet[rng.integers(phase_set.size, size=(n, num_rf_chains))]
        for _ in range(num_blocks)
    ]
    digital_blocks = [
        (rng.standard_normal((num_rf_chains, num_streams))
         + 1j * rng.standard_normal((num_rf_chains, num_streams))) / np.sqrt(2.0)
        for _ in range(num_blocks)
    ]

    def committed(q: int) -> HybridSensingMatrix:
        return HybridSensingMatrix(
            analog=np.concatenate(analog_blocks, axis=1),
            digital_blocks=list(digital_blocks),
            resolution_bits=phase_set.bits,
            side=side,
        )

    e_target = residual_target(a, committed(0), 0)
    current = _block_objective_state(a, analog_blocks, digital_blocks, 0, e_target)
    trace = [current]

    q = 0
    consecutive_failures = 0
    state_version = 0
    # A visit of block q is deterministic in (E_q, committed sub-block), so a
    # revisit with no commits in between can only repeat the previous failure.
    visited_version = [-1] * num_blocks
    for _ in range(options.max_block_visits):
        if visited_version[q] == state_version:
            consecutive_failures += 1
            if consecutive_failures >= num_blocks:
                break
            q = (q + 1) % num_blocks
            continue

        e_target = residual_target(a, committed(q), q)
        w_bb = digital_blocks[q]
        w_rf = analog_blocks[q]
        before = _block_objective_state(a, analog_blocks, digital_blocks, q, e_target)

        # Continuous-phase inner alternation on this block.
        value = before
        for _ in range(options.inner_max_iterations):
            w_bb = gd_digital_block(w_bb, w_rf.conj().T @ a, e_target, options.gd_options)
            x, _ = cg_minimize(
                lambda xv: analog_block_cost(xv, w_bb, a, e_target),
                lambda xv: egrad_analog_block(xv, w_bb, a, e_target),
                vec(w_rf),
                options.cg_options,
            )
            w_rf = invec(x, n, num_rf_chains)
            new_value = analog_block_cost(vec(w_rf), w_bb, a, e_target)
            stalled = value - new_value <= options.inner_relative_tolerance * max(
                value, 1e-300
            )
            value = new_value
            if stalled:
                break

        w_rf = quantize_phases(w_rf, phase_set)
        w_bb = gd_digital_block(w_bb, w_rf.conj().T @ a, e_target, options.gd_options)

        factor = a.conj().T @ w_rf @ w_bb
        after = float(np.linalg.norm(factor @ factor.conj().T - e_target, "fro") ** 2)
        visited_version[q] = state_version
        if after < before:
            analog_blocks[q] = w_rf
            digital_blocks[q] = w_bb
            current = after
            trace.append(current)
            state_version += 1
        effective = before - after > options.effective_relative_improvement * max(
            before, 1e-300
        )
        if effective:
            consecutive_failures = 0
        else:
            consecutive_failures += 1
            if consecutive_failures >= num_blocks:
                break
        q = (q + 1) % num_blocks

    hybrid = HybridSensingMatrix(
        analog=np.concatenate(analog_blocks, axis=1),
        digital_blocks=list(digital_blocks),
        resolution_bits=phase_set.bits,
        side=side,
        objective_trace=trace,
        design_objective=trace[-1],
    )
    return normalize_power(hybrid)
