"""Config-driven Monte-Carlo experiment runner with CSV output.

Every run is reproducible from (config, seed): sub-streams are derived from
a SHA-256 hash of the master seed and a purpose tag, so per-(scheme, bits)
design streams and per-trial channel/noise streams never interfere — adding
a scheme to a config cannot perturb another scheme's results.  Channel and
noise realizations are shared across schemes and PNR points (noise is drawn
once per trial in standard form and scaled), which pairs the Monte-Carlo
comparisons.
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .channel import AngularDictionary, build_dictionary, sample_channel, vec
from .designer_inf import InfDesignOptions, design_hybrid_inf
from .designer_low import LowDesignOptions, design_hybrid_low, gd_digital_block, residual_target
from .estimator import omp_recover, reconstruct_channel, spectral_efficiency
from .hybrid import HybridSensingMatrix, PhaseSet, normalize_power
from .metrics import equivalent_dictionary_from_combined, offdiag_histogram

SCHEME_PROPOSED_INF = "proposed_inf"
SCHEME_PROPOSED_LOW = "proposed_low"
SCHEME_RANDOM_LOW = "random_low"
SCHEME_GAUSSIAN = "gaussian_reference"
ALL_SCHEMES = (
    SCHEME_PROPOSED_INF,
    SCHEME_PROPOSED_LOW,
    SCHEME_RANDOM_LOW,
    SCHEME_GAUSSIAN,
)

PILOT_POWER = 1.0
DATA_POWER = 1.0


class ConfigurationError(ValueError):
    """Raised for malformed or inconsistent experiment configs."""


@dataclass
class ExperimentConfig:
    """Dimensions, schemes, grids and bookkeeping of one experiment."""

    n_tx: int
    n_rx: int
    n_rf: int
    n_streams: int
    t_tx: int
    t_rx: int
    g_tx: int
    g_rx: int
    num_paths: int
    schemes: list[str]
    bits_list: list[float]
    pnr_grid_db: list[float]
    dnr_grid_db: list[float] = field(default_factory=list)
    num_trials: int = 100
    seed: int = 0
    output_dir: str = "out"
    se_pnr_db: float = -10.0
    hist_bins: int = 20
    hist_trials: int = 1
    nmse_db_average: bool = False

    @property
    def tx_blocks(self) -> int:
        return self.t_tx // self.n_streams

    @property
    def rx_blocks(self) -> int:
        return self.t_rx // self.n_streams

    def validate(self) -> None:
        if self.t_tx % self.n_streams or self.t_rx % self.n_streams:
            raise ConfigurationError("t_tx and t_rx must be multiples of n_streams")
        if self.g_tx <= self.n_tx or self.g_rx <= self.n_rx:
            raise ConfigurationError("grid sizes must exceed the antenna counts")
        if self.n_streams > self.n_rf:
            raise ConfigurationError("n_streams must not exceed n_rf")
        if self.num_paths < 1 or self.num_paths > min(self.g_tx, self.g_rx):
            raise ConfigurationError("num_paths out of range for the grids")
        if self.num_trials < 1:
            raise ConfigurationError("num_trials must be >= 1")
        for scheme in self.schemes:
            if scheme not in ALL_SCHEMES:
                raise ConfigurationError(f"unknown scheme {scheme!r}")
        for bits in self.bits_list:
            if bits != math.inf and (bits < 1 or int(bits) != bits):
                raise ConfigurationError(f"invalid phase resolution {bits!r}")


_INT_KEYS = {
    "n_tx", "n_rx", "n_rf", "n_streams", "t_tx", "t_rx", "g_tx", "g_rx",
    "num_paths", "num_trials", "seed", "hist_bins", "hist_trials",
}
_FLOAT_KEYS = {"se_pnr_db"}
_LIST_FLOAT_KEYS = {"pnr_grid_db", "dnr_grid_db"}
_BOOL_KEYS = {"nmse_db_average"}
_STR_KEYS = {"output_dir"}
_REQUIRED_KEYS = {
    "n_tx", "n_rx", "n_rf", "n_streams", "t_tx", "t_rx", "g_tx", "g_rx",
    "num_paths", "schemes", "bits_list", "pnr_grid_db", "num_trials", "seed",
    "output_dir",
}


def _parse_bits(token: str) -> float:
    token = token.strip().lower()
    if token in ("inf", "infinite", "oo"):
        return math.inf
    return int(token)


def parse_config(path: str) -> ExperimentConfig:
    """Parse the key = value experiment description; unknown keys are errors."""
    values: dict[str, object] = {}
    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}:{line_no}: expected 'key = value'")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key in values:
                raise ConfigurationError(f"{path}:{line_no}: duplicate key {key!r}")
            try:
                if key in _INT_KEYS:
                    values[key] = int(value)
                elif key in _FLOAT_KEYS:
                    values[key] = float(value)
                elif key in _LIST_FLOAT_KEYS:
                    values[key] = [float(t) for t in value.split(",") if t.strip()]
                elif key in _BOOL_KEYS:
                    if value.lower() not in ("true", "false"):
                        raise ValueError(value)
                    values[key] = value.lower() == "true"
                elif key in _STR_KEYS:
                    values[key] = value
                elif key == "schemes":
                    values[key] = [t.strip() for t in value.split(",") if t.strip()]
                elif key == "bits_list":
                    values[key] = [_parse_bits(t) for t in value.split(",") if t.strip()]
                else:
                    raise ConfigurationError(f"{path}:{line_no}: unknown key {key!r}")
            except ConfigurationError:
                raise
            except ValueError as exc:
                raise ConfigurationError(
                    f"{path}:{line_no}: bad value for {key!r}: {exc}"
                ) from exc
    missing = _REQUIRED_KEYS - values.keys()
    if missing:
        raise ConfigurationError(f"{path}: missing keys: {sorted(missing)}")
    config = ExperimentConfig(**values)  # type: ignore[arg-type]
    config.validate()
    return config


def derive_rng(seed: int, *tags) -> np.random.Generator:
    """Independent generator for (seed, tags), stable across runs and platforms."""
    label = "beamforge|" + str(seed) + "|" + "|".join(str(t) for t in tags)
    digest = hashlib.sha256(label.encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "big"))


def bits_label(bits: float) -> str:
    return "inf" if bits == math.inf else str(int(bits))


def expand_cells(config: ExperimentConfig) -> list[tuple[str, float]]:
    """All (scheme, bits) combinations a config describes.

    Infinite-resolution schemes run once regardless of bits_list; the
    low-resolution schemes run at each finite resolution listed.
    """
    cells = []
    finite = [b for b in config.bits_list if b != math.inf]
    for scheme in config.schemes:
        if scheme in (SCHEME_PROPOSED_INF, SCHEME_GAUSSIAN):
            cells.append((scheme, math.inf))
        else:
            cells.extend((scheme, b) for b in finite)
    return cells


def random_baseline(
    dictionary: AngularDictionary,
    num_blocks: int,
    num_rf_chains: int,
    num_streams: int,
    phase_set: PhaseSet,
    rng: np.random.Generator,
    side: str = "receiver",
) -> HybridSensingMatrix:
    """Quantized-random analog part with a single digital fitting pass.

    Analog entries are i.i.d. uniform over the alphabet; the digital blocks
    are obtained by one round of the adaptive gradient descent against the
    block residual targets, then power-normalized.
    """
    if not phase_set.is_finite:
        raise ValueError("random_baseline requires a finite phase set")
    a = dictionary.matrix
    n = dictionary.num_antennas
    alphabet = phase_set.alphabet
    analog = alphabet[rng.integers(phase_set.size, size=(n, num_rf_chains * num_blocks))]
    digital_blocks = [
        (rng.standard_normal((num_rf_chains, num_streams))
         + 1j * rng.standard_normal((num_rf_chains, num_streams))) / np.sqrt(2.0)
        for _ in range(num_blocks)
    ]
    hybrid = HybridSensingMatrix(
        analog=analog,
        digital_blocks=digital_blocks,
        resolution_bits=phase_set.bits,
        side=side,
    )
    for q in range(num_blocks):
        e_target = residual_target(a, hybrid, q)
        a_eq = hybrid.analog_block(q).conj().T @ a
        hybrid.digital_blocks[q] = gd_digital_block(hybrid.digital_blocks[q], a_eq, e_target)
    e_target = residual_target(a, hybrid, 0)
    factor = a.conj().T @ hybrid.analog_block(0) @ hybrid.digital_blocks[0]
    final = float(np.linalg.norm(factor @ factor.conj().T - e_target, "fro") ** 2)
    hybrid.objective_trace = [final]
    hybrid.design_objective = final
    return normalize_power(hybrid)


def _gaussian_reference(n_antennas: int, n_beams: int, rng: np.random.Generator) -> np.ndarray:
    """Unconstrained i.i.d. Gaussian combined factor, power-normalized."""
    combined = (
        rng.standard_normal((n_antennas, n_beams))
        + 1j * rng.standard_normal((n_antennas, n_beams))
    ) / np.sqrt(2.0)
    return combined * (np.sqrt(n_beams) / np.linalg.norm(combined, "fro"))


@dataclass
class CellDesign:
    """Both sides' designed factors for one (scheme, bits) cell."""

    scheme: str
    bits: float
    tx: object  # HybridSensingMatrix or combined ndarray (gaussian reference)
    rx: object
    equivalent_dictionary: np.ndarray
    rx_trace: list[float]


def design_cell(
    config: ExperimentConfig,
    dict_tx: AngularDictionary,
    dict_rx: AngularDictionary,
    scheme: str,
    bits: float,
    seed_tags: tuple = ("design",),
) -> CellDesign:
    """Design both sides of a cell; deterministic in (config.seed, scheme, bits)."""
    label = bits_label(bits)
    rng_rx = derive_rng(config.seed, *seed_tags, scheme, label, "rx")
    rng_tx = derive_rng(config.seed, *seed_tags, scheme, label, "tx")

    if scheme == SCHEME_PROPOSED_INF:
        rx = design_hybrid_inf(dict_rx, config.rx_blocks, config.n_rf, config.n_streams, rng_rx)
        tx = design_hybrid_inf(
            dict_tx, config.tx_blocks, config.n_rf, config.n_streams, rng_tx, side="transmitter"
        )
    elif scheme == SCHEME_PROPOSED_LOW:
        phase_set = PhaseSet(bits)
        rx = design_hybrid_low(
            dict_rx, config.rx_blocks, config.n_rf, config.n_streams, phase_set, rng_rx
        )
        tx = design_hybrid_low(
            dict_tx, config.tx_blocks, config.n_rf, config.n_streams, phase_set, rng_tx,
            side="transmitter",
        )
    elif scheme == SCHEME_RANDOM_LOW:
        phase_set = PhaseSet(bits)
        rx = random_baseline(
            dict_rx, config.rx_blocks, config.n_rf, config.n_streams, phase_set, rng_rx
        )
        tx = random_baseline(
            dict_tx, config.tx_blocks, config.n_rf, config.n_streams, phase_set, rng_tx,
            side="transmitter",
        )
    elif scheme == SCHEME_GAUSSIAN:
        rx = _gaussian_reference(config.n_rx, config.t_rx, rng_rx)
        tx = _gaussian_reference(config.n_tx, config.t_tx, rng_tx)
    else:
        raise ConfigurationError(f"unknown scheme {scheme!r}")

    tx_combined = tx.combined if isinstance(tx, HybridSensingMatrix) else tx
    rx_combined = rx.combined if isinstance(rx, HybridSensingMatrix) else rx
    q = equivalent_dictionary_from_combined(tx_combined, rx_combined, dict_tx.matrix, dict_rx.matrix)
    rx_trace = rx.objective_trace if isinstance(rx, HybridSensingMatrix) else []
    return CellDesign(scheme=scheme, bits=bits, tx=tx, rx=rx,
                      equivalent_dictionary=q, rx_trace=rx_trace)


@dataclass(frozen=True)
class SweepRecord:
    """One aggregated metric value of one (scheme, bits, x) cell."""

    scheme: str
    bits: float
    x_name: str
    x_value: float
    metric: str
    value: float
    num_trials: int
    seed: int


def _prepare_output_dir(config: ExperimentConfig) -> str:
    out = config.output_dir
    os.makedirs(out, exist_ok=True)
    probe = os.path.join(out, ".write_probe")
    try:
        with open(probe, "w") as fh:
            fh.write("")
        os.remove(probe)
    except OSError as exc:
        raise OSError(f"output_dir {out!r} is not writable: {exc}") from exc
    return out


def _bits_sort_key(bits: float) -> float:
    return float("inf") if bits == math.inf else float(bits)


def _format_value(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def write_csv(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_format_value(v) for v in row) + "\n")


def run_sweep(config: ExperimentConfig) -> tuple[list[SweepRecord], str]:
    """NMSE-vs-PNR (and optionally spectral-efficiency-vs-DNR) Monte Carlo.

    Sensing matrices are designed once per (scheme, bits) cell and reused
    across the channel trials; the same channel and unit-variance noise draw
    feed every cell and every PNR point.  Returns the records and the path
    of the CSV they were written to.
    """
    config.validate()
    out = _prepare_output_dir(config)
    dict_tx = build_dictionary(config.n_tx, config.g_tx)
    dict_rx = build_dictionary(config.n_rx, config.g_rx)
    cells = [design_cell(config, dict_tx, dict_rx, s, b) for s, b in expand_cells(config)]

    channels = []
    raw_noises = []
    for t in range(config.num_trials):
        rng_channel = derive_rng(config.seed, "trial", t, "channel")
        channels.append(
            sample_channel(dict_tx, dict_rx, config.num_paths, rng_channel, mode="on_grid")
        )
        rng_noise = derive_rng(config.seed, "trial", t, "noise")
        raw_noises.append(
            (rng_noise.standard_normal((config.n_rx, config.t_tx))
             + 1j * rng_noise.standard_normal((config.n_rx, config.t_tx))) / np.sqrt(2.0)
        )

    records: list[SweepRecord] = []
    se_points = list(config.dnr_grid_db)
    pnr_points = list(config.pnr_grid_db)
    if se_points and config.se_pnr_db not in pnr_points:
        estimate_pnrs = pnr_points + [config.se_pnr_db]
    else:
        estimate_pnrs = pnr_points

    for cell in cells:
        tx_combined = cell.tx.combined if isinstance(cell.tx, HybridSensingMatrix) else cell.tx
        rx_combined = cell.rx.combined if isinstance(cell.rx, HybridSensingMatrix) else cell.rx
        q_scaled = np.sqrt(PILOT_POWER) * cell.equivalent_dictionary

        nmse_linear = {p: [] for p in estimate_pnrs}
        nmse_db_trials = {p: [] for p in estimate_pnrs}
        se_estimates: list[np.ndarray] = []
        for t in range(config.num_trials):
            channel = channels[t]
            signal = vec(rx_combined.conj().T @ channel.dense @ tx_combined)
            colored = vec(rx_combined.conj().T @ raw_noises[t])
            for pnr in estimate_pnrs:
                sigma = np.sqrt(PILOT_POWER * 10.0 ** (-pnr / 10.0))
                y = np.sqrt(PILOT_POWER) * signal + sigma * colored
                x_hat, _, _ = omp_recover(q_scaled, y, config.num_paths)
                h_est = reconstruct_channel(x_hat, dict_rx.matrix, dict_tx.matrix)
                err = np.linalg.norm(channel.dense - h_est, "fro") ** 2
                ref = np.linalg.norm(channel.dense, "fro") ** 2
                linear = float(err / ref)
                nmse_linear[pnr].append(linear)
                nmse_db_trials[pnr].append(
                    10.0 * np.log10(linear) if linear > 0.0 else -400.0
                )
                if se_points and pnr == config.se_pnr_db:
                    se_estimates.append(h_est)

        for pnr in pnr_points:
            if config.nmse_db_average:
                value = float(np.mean(nmse_db_trials[pnr]))
            else:
                mean_linear = float(np.mean(nmse_linear[pnr]))
                value = 10.0 * np.log10(mean_linear) if mean_linear > 0.0 else -400.0
            records.append(
                SweepRecord(cell.scheme, cell.bits, "pnr_db", float(pnr), "nmse_db",
                            value, config.num_trials, config.seed)
            )

        for dnr in se_points:
            sigma2 = DATA_POWER * 10.0 ** (-dnr / 10.0)
            rates = [
                spectral_efficiency(channels[t].dense, se_estimates[t], DATA_POWER,
                                    config.n_streams, sigma2)
                for t in range(config.num_trials)
            ]
            records.append(
                SweepRecord(cell.scheme, cell.bits, "dnr_db", float(dnr),
                            "spectral_efficiency_bps_hz", float(np.mean(rates)),
                            config.num_trials, config.seed)
            )

    records.sort(key=lambda r: (r.scheme, _bits_sort_key(r.bits), r.x_name, r.x_value, r.metric))
    path = os.path.join(out, "sweep.csv")
    rows = [
        [r.scheme, bits_label(r.bits), r.x_name, r.x_value, r.metric, r.value,
         r.num_trials, r.seed]
        for r in records
    ]
    write_csv(path, ["scheme", "bits", "x_name", "x_value", "metric", "value", "trials", "seed"], rows)
    return records, path


def run_histogram(config: ExperimentConfig) -> tuple[dict, str]:
    """Coherence histograms of the full Kronecker dictionary per cell.

    Counts are accumulated over ``hist_trials`` independent design draws.
    Returns ({(scheme, bits): (counts, edges)}, csv_path).
    """
    config.validate()
    out = _prepare_output_dir(config)
    dict_tx = build_dictionary(config.n_tx, config.g_tx)
    dict_rx = build_dictionary(config.n_rx, config.g_rx)

    results: dict[tuple[str, float], tuple[np.ndarray, np.ndarray]] = {}
    for scheme, bits in expand_cells(config):
        counts = np.zeros(config.hist_bins, dtype=np.int64)
        edges = np.linspace(0.0, 1.0, config.hist_bins + 1)
        for rep in range(config.hist_trials):
            cell = design_cell(config, dict_tx, dict_rx, scheme, bits,
                               seed_tags=("hist", rep))
            c, edges = offdiag_histogram(cell.equivalent_dictionary, config.hist_bins)
            counts += c
        results[(scheme, bits)] = (counts, edges)

    rows = []
    for (scheme, bits) in sorted(results, key=lambda k: (k[0], _bits_sort_key(k[1]))):
        counts, edges = results[(scheme, bits)]
        for i in range(config.hist_bins):
            rows.append([scheme, bits_label(bits), float(edges[i]), float(edges[i + 1]),
                         int(counts[i])])
    path = os.path.join(out, "histogram.csv")
    write_csv(path, ["scheme", "bits", "bin_low", "bin_high", "count"], rows)
    return results, path


def run_convergence_trace(config: ExperimentConfig) -> tuple[list[float], str]:
    """Objective trace of the receive-side design for a single-cell config."""
    config.validate()
    cells = expand_cells(config)
    if len(cells) != 1:
        raise ConfigurationError(
            "trace needs a config with exactly one (scheme, bits) cell; "
            f"got {len(cells)}"
        )
    out = _prepare_output_dir(config)
    dict_tx = build_dictionary(config.n_tx, config.g_tx)
    dict_rx = build_dictionary(config.n_rx, config.g_rx)
    scheme, bits = cells[0]
    cell = design_cell(config, dict_tx, dict_rx, scheme, bits, seed_tags=("trace",))
    trace = list(cell.rx_trace)
    rows = [[scheme, bits_label(bits), i, float(v)] for i, v in enumerate(trace)]
    path = os.path.join(out, "trace.csv")
    write_csv(path, ["scheme", "bits", "iteration", "objective"], rows)
    return trace, path


def run_design(config: ExperimentConfig) -> tuple[list[list], str]:
    """Design every cell, save the factors, and summarize their quality."""
    config.validate()
    out = _prepare_output_dir(config)
    dict_tx = build_dictionary(config.n_tx, config.g_tx)
    dict_rx = build_dictionary(config.n_rx, config.g_rx)
    from .metrics import mutual_coherence, scaled_identity_objective

    rows = []
    for scheme, bits in expand_cells(config):
        cell = design_cell(config, dict_tx, dict_rx, scheme, bits)
        label = bits_label(bits)
        fname = os.path.join(out, f"design_{scheme}_b{label}.npz")
        arrays = {"equivalent_dictionary": cell.equivalent_dictionary}
        for side_name, side in (("tx", cell.tx), ("rx", cell.rx)):
            if isinstance(side, HybridSensingMatrix):
                arrays[f"{side_name}_analog"] = side.analog
                arrays[f"{side_name}_digital"] = side.digital
            else:
                arrays[f"{side_name}_combined"] = side
        np.savez(fname, **arrays)
        zeta, zeta_value = scaled_identity_objective(cell.equivalent_dictionary)
        design_obj = (
            cell.rx.design_objective if isinstance(cell.rx, HybridSensingMatrix) else float("nan")
        )
        rows.append([
            scheme, label, mutual_coherence(cell.equivalent_dictionary),
            design_obj, zeta, zeta_value,
        ])
    rows.sort(key=lambda r: (r[0], float("inf") if r[1] == "inf" else float(r[1])))
    path = os.path.join(out, "design_summary.csv")
    write_csv(
        path,
        ["scheme", "bits", "coherence", "rx_design_objective", "zeta", "scaled_objective"],
        rows,
    )
    return rows, path
