"""Speckle PSF synthesis, measured-PSF ingestion, and sensor coverage checks.

The synthetic PSF comes from a Fourier-optics phase-screen model: a
circular pupil filled with i.i.d. uniform random phases, transformed and
squared. The physical diffuser's scattering angle is abstracted into the
pupil radius, which controls the speckle grain size; on a periodic DFT
grid the speckle envelope already spans the whole sensor, which is what
the row-coverage criterion needs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    ConfigurationError,
    DimensionError,
    PsfImage,
    ShutterSchedule,
)

__all__ = [
    "PupilSpec",
    "CoverageReport",
    "full_coverage_grid",
    "synthesize_speckle_psf",
    "load_psf",
    "check_coverage",
    "speckle_grain_fwhm",
]


def full_coverage_grid(sensor_dims: tuple[int, int]) -> tuple[int, int]:
    """PSF grid (2n-1 per axis) wide enough that edge sources reach every row.

    This realizes the diffuser sizing rule: with this extent, the PSF of
    a point at the bottom of the field of view still reaches the top
    sensor row under the zero-padded capture model. The pixel pitch is
    unchanged, only the stored extent grows.
    """
    return (2 * int(sensor_dims[0]) - 1, 2 * int(sensor_dims[1]) - 1)


@dataclass(frozen=True)
class PupilSpec:
    """Parameters of the random phase-screen pupil.

    ``pupil_radius_frac`` is the fraction of the half-grid covered by the
    circular pupil; smaller pupils give coarser speckle grains. The same
    spec (including seed) always produces a bit-identical PSF.
    """

    grid: tuple[int, int]
    pupil_radius_frac: float
    rng_seed: int = 0

    def __post_init__(self):
        n_y, n_x = (int(d) for d in self.grid)
        if not 0.0 < self.pupil_radius_frac <= 1.0:
            raise ConfigurationError(
                f"pupil_radius_frac must lie in (0, 1], got {self.pupil_radius_frac}"
            )
        object.__setattr__(self, "grid", (n_y, n_x))

    @property
    def pupil_radius_px(self) -> float:
        return self.pupil_radius_frac * (min(self.grid) / 2.0)


def synthesize_speckle_psf(spec: PupilSpec) -> PsfImage:
    """Render a fully developed speckle PSF from a seeded random phase screen.

    The PSF is the squared magnitude of the 2D DFT of a circular pupil
    mask filled with unit-modulus random phases (i.i.d. uniform on
    [0, 2pi)), shifted so the zero-frequency term sits at the grid
    midpoint and normalized to unit sum. The expected grain full width is
    roughly grid_size / (2 * pupil_radius_px) pixels.
    """
    n_y, n_x = spec.grid
    if min(n_y, n_x) < 8:
        raise ConfigurationError(f"grid dims must be >= 8, got {spec.grid}")
    radius = spec.pupil_radius_px
    if radius < 1.0:
        raise ConfigurationError(
            f"pupil radius {radius:.3f} px is below one pixel; pupil is degenerate"
        )
    yy = np.arange(n_y) - n_y // 2
    xx = np.arange(n_x) - n_x // 2
    dist2 = yy[:, None] ** 2 + xx[None, :] ** 2
    mask = dist2 < radius**2
    rng = np.random.default_rng(spec.rng_seed)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(n_y, n_x))
    field = np.where(mask, np.exp(1j * phases), 0.0)
    intensity = np.abs(np.fft.fft2(field)) ** 2
    intensity = np.fft.fftshift(intensity)
    intensity /= intensity.sum()
    return PsfImage(intensity, center=(n_y // 2, n_x // 2), normalized=True)


def load_psf(path, center: tuple[int, int] | None = None) -> PsfImage:
    """Ingest a measured PSF image from an array container or PGM file.

    Cleanup is deliberately minimal and monotone: clip negatives, subtract
    the per-image minimum as a constant background estimate, normalize to
    unit sum. The center defaults to the grid midpoint.
    """
    from .io import read_image  # local import: io depends on core only

    data = read_image(path)
    if data.ndim != 2:
        raise DimensionError(f"PSF file {path} holds a {data.ndim}D array, need 2D")
    data = np.clip(data, 0.0, None)
    data = data - data.min()
    total = data.sum()
    if total <= 0.0:
        raise ConfigurationError(
            f"PSF file {path} is constant; nothing remains after background subtraction"
        )
    data /= total
    return PsfImage(data, center=center, normalized=True)


@dataclass(frozen=True)
class CoverageReport:
    """Row-energy coverage of edge point sources, per the diffuser sizing rule.

    A point source at the bottom (and top) of the field of view must
    reach every sensor row for the rolling shutter to encode it into all
    time bins. ``passed`` requires nonzero energy on every row for both
    edge sources. The fractions report how many rows receive at least
    ``threshold_frac`` of the mean row energy, and ``*_min_row_fraction``
    the worst row's share of the mean.
    """

    passed: bool
    threshold_frac: float
    bottom_rows_above_threshold: float
    top_rows_above_threshold: float
    bottom_min_row_fraction: float
    top_min_row_fraction: float


def _translated_psf_on_sensor(psf: PsfImage, n_rows: int, source_row: int):
    """Clipped row translation of the PSF so its center row sits at the source."""
    p_y, p_x = psf.dims
    cy = psf.center[0]
    out = np.zeros((n_rows, p_x))
    a_lo = max(0, source_row - cy)
    a_hi = min(n_rows, source_row - cy + p_y)
    if a_hi > a_lo:
        out[a_lo:a_hi, :] = psf.data[a_lo - source_row + cy:a_hi - source_row + cy, :]
    return out


def _row_energy_stats(psf: PsfImage, n_rows: int, source_row: int,
                      threshold_frac: float):
    if psf.dims[0] == n_rows:
        # a sensor-sized PSF is one period of the phase-screen model and
        # stands in for a wider physical pattern: translate periodically
        cy = psf.center[0]
        shifted = np.roll(psf.data, source_row - cy, axis=0)
    else:
        shifted = _translated_psf_on_sensor(psf, n_rows, source_row)
    row_energy = shifted.sum(axis=1)
    mean_energy = row_energy.mean()
    if mean_energy <= 0.0:
        return 0.0, 0.0, False
    above = float(np.mean(row_energy >= threshold_frac * mean_energy))
    min_frac = float(row_energy.min() / mean_energy)
    all_nonzero = bool(np.all(row_energy > 0.0))
    return above, min_frac, all_nonzero


def check_coverage(
    psf: PsfImage, schedule: ShutterSchedule, threshold_frac: float = 0.1
) -> CoverageReport:
    """Check that edge point sources illuminate every sensor row.

    The PSF is translated to the bottom (and top) scene row and the
    per-row energy of the translated pattern is inspected. A PSF larger
    than the sensor is translated literally with border clipping; a
    sensor-sized PSF is treated as one period of the phase-screen model
    and translated periodically, since it stands in for a physically
    wider pattern. Pass requires nonzero energy on every row for both
    edge sources.
    """
    if psf.dims[0] < schedule.n_rows:
        raise DimensionError(
            f"PSF has {psf.dims[0]} rows but schedule covers {schedule.n_rows}"
        )
    bottom_above, bottom_min, bottom_ok = _row_energy_stats(
        psf, schedule.n_rows, schedule.n_rows - 1, threshold_frac
    )
    top_above, top_min, top_ok = _row_energy_stats(
        psf, schedule.n_rows, 0, threshold_frac
    )
    return CoverageReport(
        passed=bottom_ok and top_ok,
        threshold_frac=threshold_frac,
        bottom_rows_above_threshold=bottom_above,
        top_rows_above_threshold=top_above,
        bottom_min_row_fraction=bottom_min,
        top_min_row_fraction=top_min,
    )


def speckle_grain_fwhm(psf: PsfImage) -> float:
    """Speckle grain size: FWHM of the PSF's spatial autocovariance peak.

    Measured on the central row and column profiles through the peak with
    linear interpolation of the half-max crossings; returns the mean of
    the two widths in pixels.
    """
    data = psf.data - psf.data.mean()
    spec = np.fft.rfft2(data)
    auto = np.fft.irfft2(np.abs(spec) ** 2, s=data.shape)
    auto = np.fft.fftshift(auto)
    cy, cx = data.shape[0] // 2, data.shape[1] // 2
    widths = [
        _fwhm_of_profile(auto[cy, :], cx),
        _fwhm_of_profile(auto[:, cx], cy),
    ]
    return float(np.mean(widths))


def _fwhm_of_profile(profile: np.ndarray, peak_idx: int) -> float:
    peak = profile[peak_idx]
    if peak <= 0:
        raise ConfigurationError("autocovariance peak is not positive")
    half = peak / 2.0

    def crossing(direction: int) -> float:
        idx = peak_idx
        while 0 < idx < len(profile) - 1:
            nxt = idx + direction
            if profile[nxt] < half:
                # linear interpolation between idx and nxt
                frac = (profile[idx] - half) / (profile[idx] - profile[nxt])
                return abs(nxt - peak_idx) - 1 + frac
            idx = nxt
        return float(abs(idx - peak_idx))

    return crossing(+1) + crossing(-1)
