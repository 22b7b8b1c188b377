"""Reconstruction quality metrics and the sparsity/measurement sweep."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    ConfigurationError,
    DimensionError,
    NoDominantFrequencyError,
    SensorFrame,
    ShutterSchedule,
    problem_dims,
)
from .forward import ForwardOperator
from .psf import PupilSpec, synthesize_speckle_psf
from .scenes import add_gaussian_noise
from .solver import SolverConfig, solve

__all__ = [
    "psnr",
    "relative_error",
    "dominant_frequency",
    "support_f1",
    "SweepCell",
    "phase_transition_sweep",
]

PSNR_CAP_DB = 200.0


def _asarray(x) -> np.ndarray:
    data = getattr(x, "data", x)
    return np.asarray(data, dtype=np.float64)


def psnr(truth, est) -> float:
    """Peak signal-to-noise ratio in dB, capped at 200 for exact matches."""
    t = _asarray(truth)
    e = _asarray(est)
    if t.shape != e.shape:
        raise DimensionError(f"shape mismatch: truth {t.shape} vs estimate {e.shape}")
    peak = t.max()
    if peak <= 0:
        raise ConfigurationError("psnr needs a truth with a positive peak")
    mse = float(np.mean((e - t) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * np.log10(peak**2 / mse), PSNR_CAP_DB)


def relative_error(truth, est) -> float:
    """l2 distance between estimate and truth, relative to the truth norm."""
    t = _asarray(truth).ravel()
    e = _asarray(est).ravel()
    if t.shape != e.shape:
        raise DimensionError(f"shape mismatch: truth {t.shape} vs estimate {e.shape}")
    denom = np.linalg.norm(t)
    if denom == 0.0:
        raise ConfigurationError("relative_error is undefined for a zero truth")
    return float(np.linalg.norm(e - t) / denom)


def dominant_frequency(trace: np.ndarray) -> int:
    """Index of the strongest non-DC DFT bin; ties break toward lower index."""
    x = np.asarray(trace, dtype=np.float64).ravel()
    if x.size < 4:
        raise DimensionError(f"trace must have length >= 4, got {x.size}")
    spectrum = np.fft.fft(x)
    mags = np.abs(spectrum[1:])
    if mags.max() <= 1e-9 * max(1.0, abs(spectrum[0])):
        raise NoDominantFrequencyError("trace has no energy outside the DC bin")
    return int(np.argmax(mags)) + 1


def support_f1(truth, est, rel_threshold: float = 0.01) -> float:
    """F1 overlap between supports, thresholded at a fraction of each max."""
    t = _asarray(truth)
    e = _asarray(est)
    if t.shape != e.shape:
        raise DimensionError(f"shape mismatch: truth {t.shape} vs estimate {e.shape}")
    t_sup = t > rel_threshold * t.max() if t.max() > 0 else np.zeros(t.shape, bool)
    e_sup = e > rel_threshold * e.max() if e.max() > 0 else np.zeros(e.shape, bool)
    total = int(t_sup.sum()) + int(e_sup.sum())
    if total == 0:
        return 1.0
    return 2.0 * int(np.logical_and(t_sup, e_sup).sum()) / total


@dataclass(frozen=True)
class SweepCell:
    """Success rate of sparse recovery at one sparsity level."""

    k: int
    m: int
    n: int
    trials: int
    success_rate: float


def _cell_seeds(base_seed: int, k: int, trial: int) -> np.ndarray:
    # stable across platforms and independent of evaluation order
    return np.random.SeedSequence([int(base_seed), int(k), int(trial)]).generate_state(3)


def phase_transition_sweep(
    dims: tuple[int, int, int],
    k_list,
    snr: float | None,
    trials: int,
    cfg: SolverConfig,
    seed: int = 0,
    pupil_radius_frac: float = 0.25,
    success_threshold: float = 0.1,
) -> list[SweepCell]:
    """Empirical recovery success rate as a function of scene sparsity.

    For each sparsity k, draws ``trials`` scenes of k unit spikes at
    random positions, encodes each through a per-cell seeded speckle
    operator, reconstructs, and scores success as relative error below
    ``success_threshold`` (a zero scene counts as success only when the
    reconstruction is exactly zero). Per-cell seeds derive from
    (seed, k, trial), so results do not depend on evaluation order.
    """
    n_y, n_x, n_t = (int(d) for d in dims)
    if trials < 10:
        raise ConfigurationError(f"trials must be >= 10, got {trials}")
    if n_y % n_t != 0:
        raise ConfigurationError(
            f"sweep needs n_t ({n_t}) to divide the row count ({n_y})"
        )
    m, n = problem_dims((n_y, n_x, n_t))
    schedule = ShutterSchedule.default(n_y, rows_per_bin=n_y // n_t)
    cells = []
    for k in k_list:
        k = int(k)
        if not 0 <= k <= n:
            raise ConfigurationError(f"sparsity k={k} outside [0, {n}]")
        successes = 0
        for trial in range(trials):
            psf_seed, scene_seed, noise_seed = _cell_seeds(seed, k, trial)
            psf = synthesize_speckle_psf(
                PupilSpec((n_y, n_x), pupil_radius_frac, rng_seed=psf_seed)
            )
            op = ForwardOperator(psf, schedule, (n_y, n_x, n_t))
            scene = np.zeros(n)
            if k > 0:
                idx = np.random.default_rng(scene_seed).choice(n, size=k, replace=False)
                scene[idx] = 1.0
            scene = scene.reshape(n_y, n_x, n_t)
            frame = op.forward(scene)
            if snr is not None and frame.max() > 0:
                frame = add_gaussian_noise(SensorFrame(frame), snr, seed=noise_seed).data
            report = solve(op, frame, cfg)
            est = report.solution.data
            if k == 0:
                success = not est.any()
            else:
                success = relative_error(scene, est) < success_threshold
            successes += bool(success)
        cells.append(SweepCell(k=k, m=m, n=n, trials=trials,
                               success_rate=successes / trials))
    return cells
