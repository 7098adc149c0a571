"""Conjugate-gradient minimizer on the product-of-complex-circles manifold.

Points are plain complex vectors whose entries all have unit modulus; the
feasible set is treated as a Riemannian manifold so constant-modulus
constraints never have to be relaxed.  The optimizer takes a cost and its
Euclidean gradient (real-inner-product convention: the directional derivative
along a real perturbation of entry i is Re(grad_i), along an imaginary
perturbation Im(grad_i)).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

UNIT_MODULUS_TOL = 1e-9

MAX_LINE_SEARCH_HALVINGS = 50


class RetractionError(ArithmeticError):
    """Raised when a retraction hits a zero-modulus entry."""


def _check_on_circle(x: np.ndarray) -> None:
    dev = np.max(np.abs(np.abs(x) - 1.0))
    if dev > UNIT_MODULUS_TOL:
        raise ValueError(f"point off the unit-modulus manifold (deviation {dev:.2e})")


def project_tangent(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Project a Euclidean gradient onto the tangent space at x.

    The result z satisfies Re(conj(x) * z) = 0 elementwise.
    """
    x = np.asarray(x)
    g = np.asarray(g)
    if x.shape != g.shape:
        raise ValueError("shape mismatch between point and gradient")
    _check_on_circle(x)
    return g - (g * x.conj()).real * x


def retract(x: np.ndarray, d: np.ndarray, step: float) -> np.ndarray:
    """Map x + step*d back onto the manifold by per-entry normalization."""
    moved = np.asarray(x) + step * np.asarray(d)
    moduli = np.abs(moved)
    if np.any(moduli == 0.0):
        raise RetractionError("retraction hit a zero-modulus entry")
    return moved / moduli


def transport(d: np.ndarray, x_next: np.ndarray) -> np.ndarray:
    """Carry a previous search direction into the tangent space at x_next."""
    d = np.asarray(d)
    x_next = np.asarray(x_next)
    return d - (d * x_next.conj()).real * x_next


def _real_inner(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.vdot(a, b).real)


def polak_ribiere(grad_next: np.ndarray, grad_prev: np.ndarray) -> float:
    """PR+ conjugate-direction coefficient (clamped below at zero)."""
    denom = _real_inner(grad_prev, grad_prev)
    if denom <= np.finfo(float).tiny:
        return 0.0
    beta = _real_inner(grad_next, grad_next - grad_prev) / denom
    return max(beta, 0.0)


@dataclass
class CgOptions:
    """Stopping and line-search knobs for :func:`cg_minimize`.

    ``gradient_norm_tolerance`` is per-coordinate: the loop stops once the
    Riemannian gradient norm drops below tolerance * sqrt(dimension).
    """

    max_iterations: int = 500
    gradient_norm_tolerance: float = 1e-6
    relative_cost_tolerance: float = 1e-8
    armijo_sufficient_decrease: float = 1e-4
    armijo_contraction: float = 0.5
    initial_step: float = 1.0


def _line_search(
    cost: Callable[[np.ndarray], float],
    x: np.ndarray,
    direction: np.ndarray,
    f_x: float,
    grad_norm_sq: float,
    step0: float,
    opts: CgOptions,
) -> tuple[np.ndarray, float, float] | None:
    """Armijo backtracking; returns (x_new, f_new, step) or None on failure.

    Sufficient decrease is measured against the squared Riemannian gradient
    norm: f_new <= f - c * step * ||grad||^2.
    """
    step = step0
    for _ in range(MAX_LINE_SEARCH_HALVINGS):
        try:
            candidate = retract(x, direction, step)
        except RetractionError:
            step *= opts.armijo_contraction
            continue
        f_new = cost(candidate)
        if f_new <= f_x - opts.armijo_sufficient_decrease * step * grad_norm_sq:
            # The weak sufficient-decrease test can accept an overshooting
            # step (slow oscillation around the valley); keep contracting as
            # long as that strictly improves the cost.
            while True:
                shorter = step * opts.armijo_contraction
                try:
                    probe = retract(x, direction, shorter)
                except RetractionError:
                    break
                f_probe = cost(probe)
                if f_probe >= f_new:
                    break
                candidate, f_new, step = probe, f_probe, shorter
            return candidate, f_new, step
        step *= opts.armijo_contraction
    return None


def cg_minimize(
    cost: Callable[[np.ndarray], float],
    egrad: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    opts: CgOptions | None = None,
    callback: Callable[[dict], None] | None = None,
) -> tuple[np.ndarray, list[float]]:
    """Riemannian conjugate gradient with Armijo backtracking and PR+ directions.

    Returns the final point and the per-iteration cost trace (non-increasing;
    the first entry is the cost at x0).  The search direction falls back to
    steepest descent when the conjugate direction stops making progress, and
    the loop terminates on the gradient-norm / relative-decrease / iteration
    criteria in ``opts``.
    """
    opts = opts or CgOptions()
    x = np.asarray(x0, dtype=complex)
    _check_on_circle(x)
    dim = x.size
    grad_tol = opts.gradient_norm_tolerance * np.sqrt(dim)

    f_x = float(cost(x))
    trace = [f_x]
    grad = project_tangent(x, egrad(x))
    grad_norm = np.linalg.norm(grad)
    if callback is not None:
        callback({"x": x, "cost": f_x, "step": 0.0, "grad_norm": float(grad_norm)})
    if grad_norm < grad_tol:
        return x, trace

    direction = -grad
    is_steepest = True
    step = opts.initial_step
    for _ in range(opts.max_iterations):
        result = _line_search(cost, x, direction, f_x, grad_norm**2, step, opts)
        if result is None and not is_steepest:
            # Conjugate direction exhausted: restart from steepest descent.
            direction = -grad
            is_steepest = True
            result = _line_search(cost, x, direction, f_x, grad_norm**2, step, opts)
        if result is None:
            break
        x_new, f_new, accepted = result

        grad_new = project_tangent(x_new, egrad(x_new))
        beta = polak_ribiere(grad_new, grad)
        direction = -grad_new + beta * transport(direction, x_new)
        is_steepest = beta == 0.0
        # Sufficient-descent safeguard: a conjugate direction too orthogonal
        # to the gradient makes the backtracking crawl, so restart from
        # steepest descent whenever <grad, d> > -0.01 ||grad||^2.
        if _real_inner(grad_new, direction) > -0.01 * float(np.vdot(grad_new, grad_new).real):
            direction = -grad_new
            is_steepest = True

        decrease = f_x - f_new
        x, f_x, grad = x_new, f_new, grad_new
        grad_norm = np.linalg.norm(grad)
        trace.append(f_x)
        if callback is not None:
            callback({"x": x, "cost": f_x, "step": accepted, "grad_norm": float(grad_norm)})

        step = min(2.0 * accepted, 1.0)
        if grad_norm < grad_tol:
            break
        if decrease <= opts.relative_cost_tolerance * max(abs(f_x), 1e-300):
            break
    return x, trace


def finite_difference_gradient(
    cost: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-6
) -> np.ndarray:
    """Central-difference Euclidean gradient, used as the test oracle."""
    x = np.asarray(x, dtype=complex)
    grad = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = 1.0
        d_re = (cost(x + h * e) - cost(x - h * e)) / (2.0 * h)
        d_im = (cost(x + 1j * h * e) - cost(x - 1j * h * e)) / (2.0 * h)
        grad[i] = d_re + 1j * d_im
    return grad
