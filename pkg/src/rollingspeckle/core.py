"""Shared domain types and acquisition-parameter arithmetic.

All array-carrying types are immutable after construction: the wrapped
arrays are copied to float64 and marked read-only, so instances are safe
to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "RollingSpeckleError",
    "DimensionError",
    "ConfigurationError",
    "GenerationError",
    "DegenerateOperatorError",
    "DivergenceError",
    "NoDominantFrequencyError",
    "VideoTensor",
    "PsfImage",
    "SensorFrame",
    "ShutterSchedule",
    "AcquisitionParams",
    "effective_fps",
    "problem_dims",
]

# products of grid dims beyond this are treated as misconfigurations
_MAX_ELEMENTS = 2**62


class RollingSpeckleError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(RollingSpeckleError):
    """Array dimensions are inconsistent or out of supported range."""


class ConfigurationError(RollingSpeckleError):
    """A parameter value is outside its valid domain."""


class GenerationError(RollingSpeckleError):
    """A scene generator cannot satisfy its placement constraints."""


class DegenerateOperatorError(RollingSpeckleError):
    """The forward operator maps everything to zero."""


class DivergenceError(RollingSpeckleError):
    """The iterative solver produced a diverging objective."""


class NoDominantFrequencyError(RollingSpeckleError):
    """A time trace carries no energy outside the DC bin."""


def _freeze(data, dtype=np.float64) -> np.ndarray:
    out = np.array(data, dtype=dtype)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class VideoTensor:
    """Dynamic scene O(y, x, t) as a 3D intensity stack of shape (n_y, n_x, n_t).

    Entries must be nonnegative (the scene is an intensity) unless
    ``allow_negative`` is set, which is used for signed intermediates such
    as adjoint outputs and unconstrained solver iterates.
    """

    data: np.ndarray
    allow_negative: bool = field(default=False, compare=False)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3:
            raise DimensionError(f"video tensor must be 3D, got shape {data.shape}")
        if min(data.shape) < 1:
            raise DimensionError(f"video tensor dims must be positive, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ConfigurationError("video tensor entries must be finite")
        if not self.allow_negative and data.min() < 0:
            raise ConfigurationError(
                "video tensor entries must be nonnegative (intensity scene)"
            )
        object.__setattr__(self, "data", _freeze(data))

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape  # (n_y, n_x, n_t)

    @property
    def n_t(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class PsfImage:
    """Speckle intensity point-spread-function on the sensor grid.

    ``center`` is the pixel where the image of an on-axis point source
    sits; it defaults to the grid midpoint (floor division), which is the
    convention of :func:`rollingspeckle.psf.synthesize_speckle_psf`.
    """

    data: np.ndarray
    center: tuple[int, int] | None = None
    normalized: bool = True

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise DimensionError(f"PSF must be 2D, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ConfigurationError("PSF entries must be finite")
        if data.min() < 0:
            raise ConfigurationError("PSF entries must be nonnegative")
        if self.normalized:
            total = data.sum()
            if abs(total - 1.0) > 1e-12 * max(1.0, abs(total)):
                raise ConfigurationError(
                    f"normalized PSF must sum to 1, got {total!r}"
                )
        center = self.center
        if center is None:
            center = (data.shape[0] // 2, data.shape[1] // 2)
        cy, cx = int(center[0]), int(center[1])
        if not (0 <= cy < data.shape[0] and 0 <= cx < data.shape[1]):
            raise ConfigurationError(f"PSF center {center} outside grid {data.shape}")
        object.__setattr__(self, "data", _freeze(data))
        object.__setattr__(self, "center", (cy, cx))

    @property
    def dims(self) -> tuple[int, int]:
        return self.data.shape


@dataclass(frozen=True)
class SensorFrame:
    """Single captured 2D camera image of shape (n_y, n_x).

    Entries may be negative only as the result of noise injection, so the
    type enforces finiteness but not sign.
    """

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise DimensionError(f"sensor frame must be 2D, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ConfigurationError("sensor frame entries must be finite")
        object.__setattr__(self, "data", _freeze(data))

    @property
    def dims(self) -> tuple[int, int]:
        return self.data.shape


@dataclass(frozen=True)
class ShutterSchedule:
    """Row-to-time-bin mapping of a (possibly multi-row) rolling shutter.

    ``row_to_bin`` is stored as an explicit table rather than a formula so
    nonstandard readout orders can be configured without an API change.
    ``row_period_s`` is the time the shutter spends on one row group
    (``rows_per_bin`` rows), i.e. rows_per_bin / shutter speed.
    """

    n_rows: int
    rows_per_bin: int
    row_to_bin: np.ndarray
    row_period_s: float = 1.0
    exposure_s: float | None = None

    def __post_init__(self):
        if self.n_rows < 1:
            raise ConfigurationError(f"n_rows must be >= 1, got {self.n_rows}")
        if self.rows_per_bin < 1:
            raise ConfigurationError(f"rows_per_bin must be >= 1, got {self.rows_per_bin}")
        if not self.row_period_s > 0:
            raise ConfigurationError(f"row_period_s must be > 0, got {self.row_period_s}")
        exposure = self.exposure_s if self.exposure_s is not None else self.row_period_s
        if not exposure > 0:
            raise ConfigurationError(f"exposure_s must be > 0, got {exposure}")
        table = np.asarray(self.row_to_bin, dtype=np.int64)
        if table.shape != (self.n_rows,):
            raise DimensionError(
                f"row_to_bin must have length n_rows={self.n_rows}, got {table.shape}"
            )
        n_t = self.n_t
        if table.min() < 0 or table.max() > n_t - 1:
            raise ConfigurationError(
                f"row_to_bin values must lie in [0, {n_t - 1}]"
            )
        if np.unique(table).size != n_t:
            raise ConfigurationError("every time bin must be hit by at least one row")
        object.__setattr__(self, "row_to_bin", _freeze(table, dtype=np.int64))
        object.__setattr__(self, "exposure_s", float(exposure))

    @classmethod
    def default(
        cls,
        n_rows: int,
        rows_per_bin: int = 2,
        row_period_s: float = 1.0,
        exposure_s: float | None = None,
    ) -> "ShutterSchedule":
        """Top-to-bottom schedule: row r belongs to bin floor(r / rows_per_bin)."""
        if rows_per_bin < 1:
            raise ConfigurationError(f"rows_per_bin must be >= 1, got {rows_per_bin}")
        table = np.arange(n_rows) // rows_per_bin
        return cls(
            n_rows=n_rows,
            rows_per_bin=rows_per_bin,
            row_to_bin=table,
            row_period_s=row_period_s,
            exposure_s=exposure_s,
        )

    @property
    def n_t(self) -> int:
        return -(-self.n_rows // self.rows_per_bin)  # ceil division

    @property
    def shutter_speed_rows_per_s(self) -> float:
        return self.rows_per_bin / self.row_period_s

    @property
    def short_exposure_valid(self) -> bool:
        """True when the exposure does not outlast the row period.

        The single-instant row sampling model only holds under this
        condition; operators reject schedules that violate it.
        """
        return self.exposure_s <= self.row_period_s


@dataclass(frozen=True)
class AcquisitionParams:
    """Bookkeeping for a simulated acquisition.

    Magnification is carried for provenance only: scenes are defined
    directly on the sensor grid.
    """

    magnification: float = 1.0
    snr: float | None = None
    rng_seed: int = 0

    def __post_init__(self):
        if self.snr is not None and not self.snr > 0:
            raise ConfigurationError(f"snr must be > 0 when present, got {self.snr}")


def effective_fps(schedule: ShutterSchedule) -> float:
    """Frame rate of the reconstructed video: one frame per row group."""
    return 1.0 / schedule.row_period_s


def problem_dims(dims: tuple[int, int, int]) -> tuple[int, int]:
    """Measurement count m = n_y*n_x and unknown count n = n_y*n_x*n_t."""
    n_y, n_x, n_t = (int(d) for d in dims)
    if min(n_y, n_x, n_t) < 1:
        raise DimensionError(f"dims must be positive, got {dims}")
    m = n_y * n_x
    n = m * n_t
    if n > _MAX_ELEMENTS:
        raise DimensionError(f"dims {dims} give {n} unknowns, beyond supported range")
    return m, n
