"""Shared types for hybrid sensing matrices and phase-shifter alphabets."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def block_diag(blocks: list[np.ndarray]) -> np.ndarray:
    """Complex block-diagonal assembly of equally-typed 2-D blocks."""
    rows = sum(b.shape[0] for b in blocks)
    cols = sum(b.shape[1] for b in blocks)
    out = np.zeros((rows, cols), dtype=complex)
    r = c = 0
    for b in blocks:
        out[r : r + b.shape[0], c : c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    return out


@dataclass(frozen=True)
class PhaseSet:
    """Feasible phase alphabet of a phase-shifter network.

    ``bits`` is a positive integer B (alphabet = the 2^B roots of unity) or
    math.inf for continuous phases (no quantization).
    """

    bits: float

    def __post_init__(self):
        if self.bits != math.inf:
            if int(self.bits) != self.bits or self.bits < 1:
                raise ValueError("bits must be a positive integer or math.inf")

    @property
    def is_finite(self) -> bool:
        return self.bits != math.inf

    @property
    def size(self) -> int:
        if not self.is_finite:
            raise ValueError("infinite phase set has no alphabet")
        return 2 ** int(self.bits)

    @property
    def alphabet(self) -> np.ndarray:
        """The 2^B alphabet values exp(j*2*pi*b/2^B), b = 1..2^B."""
        n = self.size
        return np.exp(2j * np.pi * np.arange(1, n + 1) / n)


INFINITE_PHASES = PhaseSet(bits=math.inf)


def quantize_phases(matrix: np.ndarray, phase_set: PhaseSet) -> np.ndarray:
    """Snap unit-modulus entries to the nearest alphabet member.

    Ties (exactly between two alphabet points) break toward the candidate
    with the smaller phase in [0, 2*pi), so quantization is deterministic.
    An infinite phase set passes the input through unchanged.
    """
    matrix = np.asarray(matrix, dtype=complex)
    if not phase_set.is_finite:
        return matrix.copy()
    n = phase_set.size
    delta = 2.0 * np.pi / n
    theta = np.mod(np.angle(matrix), 2.0 * np.pi)
    t = theta / delta
    low = np.floor(t)
    frac = t - low
    nearest = np.where(frac > 0.5, low + 1.0, low)
    tie = frac == 0.5
    if np.any(tie):
        phase_low = np.mod(low * delta, 2.0 * np.pi)
        phase_high = np.mod((low + 1.0) * delta, 2.0 * np.pi)
        nearest = np.where(tie & (phase_high < phase_low), low + 1.0, nearest)
    return np.exp(1j * delta * np.mod(nearest, n))


@dataclass
class HybridSensingMatrix:
    """One side's training-beam factors: constant-modulus analog part plus
    per-block digital matrices (block-diagonal when assembled).

    ``design_objective`` is the value of the minimized Gram residual at the
    end of the design, before the power normalization that fixes
    ||analog @ digital||_F^2 to the number of training beams;
    ``objective_trace`` records that value across outer iterations / commits.
    """

    analog: np.ndarray
    digital_blocks: list[np.ndarray]
    resolution_bits: float
    side: str
    objective_trace: list[float] = field(default_factory=list)
    design_objective: float = float("nan")

    @property
    def num_blocks(self) -> int:
        return len(self.digital_blocks)

    @property
    def digital(self) -> np.ndarray:
        """The assembled block-diagonal digital matrix (M x T)."""
        return block_diag(self.digital_blocks)

    @property
    def combined(self) -> np.ndarray:
        """analog @ digital, the N x T product the channel actually sees."""
        return self.analog @ self.digital

    @property
    def num_beams(self) -> int:
        return sum(b.shape[1] for b in self.digital_blocks)

    def analog_block(self, index: int) -> np.ndarray:
        n_rf = self.analog.shape[1] // self.num_blocks
        return self.analog[:, index * n_rf : (index + 1) * n_rf]


def normalize_power(hybrid: HybridSensingMatrix) -> HybridSensingMatrix:
    """Scale the digital blocks so ||analog @ digital||_F^2 equals the beam count."""
    norm = np.linalg.norm(hybrid.combined, "fro")
    if norm == 0.0:
        raise ValueError("cannot power-normalize an all-zero sensing matrix")
    scale = np.sqrt(hybrid.num_beams) / norm
    hybrid.digital_blocks = [scale * b for b in hybrid.digital_blocks]
    return hybrid
