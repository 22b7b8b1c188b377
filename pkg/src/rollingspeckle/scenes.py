"""Ground-truth scene generators and the measurement noise model.

Two scene families mirror the two experiment classes this toolkit
targets: sparse digit glyphs that change position every time bin, and
point sources blinking as square waves at distinct bin-periods. All
generators are pure functions of their arguments including the seed.
"""

from __future__ import annotations

import numpy as np

from .core import (
    ConfigurationError,
    GenerationError,
    SensorFrame,
    VideoTensor,
)

__all__ = [
    "GLYPH_ATLAS",
    "GLYPH_ATLAS_VERSION",
    "gen_moving_glyphs",
    "gen_blinking_sources",
    "add_gaussian_noise",
]

# 5x3 segment digits 0-9; versioned so generated fixtures stay reproducible
GLYPH_ATLAS_VERSION = 1
GLYPH_ATLAS = np.array(
    [
        [[1, 1, 1], [1, 0, 1], [1, 0, 1], [1, 0, 1], [1, 1, 1]],
        [[0, 1, 0], [1, 1, 0], [0, 1, 0], [0, 1, 0], [1, 1, 1]],
        [[1, 1, 1], [0, 0, 1], [1, 1, 1], [1, 0, 0], [1, 1, 1]],
        [[1, 1, 1], [0, 0, 1], [1, 1, 1], [0, 0, 1], [1, 1, 1]],
        [[1, 0, 1], [1, 0, 1], [1, 1, 1], [0, 0, 1], [0, 0, 1]],
        [[1, 1, 1], [1, 0, 0], [1, 1, 1], [0, 0, 1], [1, 1, 1]],
        [[1, 1, 1], [1, 0, 0], [1, 1, 1], [1, 0, 1], [1, 1, 1]],
        [[1, 1, 1], [0, 0, 1], [0, 1, 0], [0, 1, 0], [0, 1, 0]],
        [[1, 1, 1], [1, 0, 1], [1, 1, 1], [1, 0, 1], [1, 1, 1]],
        [[1, 1, 1], [1, 0, 1], [1, 1, 1], [0, 0, 1], [1, 1, 1]],
    ],
    dtype=np.float64,
)


def gen_moving_glyphs(
    dims: tuple[int, int, int], n_glyphs: int, glyph_size: int, seed=0
) -> VideoTensor:
    """Binary digit glyphs at seeded random positions, one time bin each.

    Glyph g renders digit g mod 10 from the built-in atlas, scaled by
    pixel replication to roughly ``glyph_size`` pixels tall, and appears
    only in bin g mod n_t. Values are exactly 0 or 1.
    """
    n_y, n_x, n_t = (int(d) for d in dims)
    if n_glyphs < 0:
        raise GenerationError(f"n_glyphs must be >= 0, got {n_glyphs}")
    scene = np.zeros((n_y, n_x, n_t))
    if n_glyphs == 0:
        return VideoTensor(scene)
    if glyph_size >= min(n_y, n_x):
        raise GenerationError(
            f"glyph_size {glyph_size} does not fit the {n_y}x{n_x} grid"
        )
    cell = max(1, glyph_size // 5)
    g_h, g_w = 5 * cell, 3 * cell
    if g_h > n_y or g_w > n_x:
        raise GenerationError(
            f"rendered glyph {g_h}x{g_w} does not fit the {n_y}x{n_x} grid"
        )
    block = np.ones((cell, cell))
    rng = np.random.default_rng(seed)
    for g in range(n_glyphs):
        glyph = np.kron(GLYPH_ATLAS[g % 10], block)
        y0 = int(rng.integers(0, n_y - g_h + 1))
        x0 = int(rng.integers(0, n_x - g_w + 1))
        t = g % n_t
        patch = scene[y0:y0 + g_h, x0:x0 + g_w, t]
        scene[y0:y0 + g_h, x0:x0 + g_w, t] = np.maximum(patch, glyph)
    return VideoTensor(scene)


def gen_blinking_sources(
    dims: tuple[int, int, int],
    sources: list[tuple[int, int, int, int, float]],
) -> VideoTensor:
    """Single-pixel sources blinking as 50%-duty square waves.

    Each source is (row, col, period_bins, phase_bins, amplitude); it is
    on (at its amplitude) for the first half of each period, with the
    pattern delayed by ``phase_bins``.
    """
    n_y, n_x, n_t = (int(d) for d in dims)
    scene = np.zeros((n_y, n_x, n_t))
    t = np.arange(n_t)
    for row, col, period, phase, amplitude in sources:
        if not (0 <= row < n_y and 0 <= col < n_x):
            raise GenerationError(
                f"source position ({row}, {col}) outside {n_y}x{n_x} grid"
            )
        if period < 2:
            raise GenerationError(f"period_bins must be >= 2, got {period}")
        on = ((t - phase) % period) < period / 2.0
        scene[row, col, :] += amplitude * on
    return VideoTensor(scene)


def add_gaussian_noise(frame: SensorFrame, snr: float, seed=0) -> SensorFrame:
    """Additive white Gaussian noise at a declared measurement SNR.

    The noise scale is sigma = mean(signal pixels) / snr, where signal
    pixels are those with strictly positive value; this keeps the scale
    meaningful for sparse frames with large dark regions.
    """
    if not snr > 0:
        raise ConfigurationError(f"snr must be > 0, got {snr}")
    data = frame.data
    positive = data[data > 0]
    if positive.size == 0:
        raise ConfigurationError(
            "SNR is undefined for a frame with no positive pixels"
        )
    sigma = float(positive.mean()) / snr
    rng = np.random.default_rng(seed)
    return SensorFrame(data + rng.normal(0.0, sigma, size=data.shape))
