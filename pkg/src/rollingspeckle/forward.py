"""Matrix-free rolling-shutter speckle forward operator and its exact adjoint.

The measurement model is: convolve each time bin of the scene with the
speckle PSF (zero-padded linear convolution, centered crop), then keep
from each convolved frame only the sensor rows whose shutter bin matches
that frame. The adjoint scatters frame rows back into per-bin images and
correlates them with the PSF under the same boundary contract.

Boundary contract
-----------------
A delta image at pixel p convolved with the PSF returns the PSF
translated so that its declared center sits at p, clipped at the sensor
borders. Circular wraparound is never used: light falling off the sensor
edge is lost, and the adjoint accounts for exactly the same loss.

The PSF grid may be larger than the sensor grid (same pixel pitch,
wider extent). A PSF of extent 2n-1 per axis realizes the diffuser
sizing rule where a point at the edge of the field of view still
illuminates every sensor row; with a sensor-sized PSF, scene pixels far
from their bin's sensor rows are invisible to the measurement.

Implementation notes
--------------------
Convolutions run as batched real FFTs over a time-major contiguous stack.
The FFT size is the smallest fast length that keeps the cropped output
window free of circular aliasing, which is smaller than the full linear
convolution support when the PSF center is interior. Results are
independent of any internal batching: each 2D transform is computed
independently and rows are written to disjoint output locations.
"""

from __future__ import annotations

import numpy as np
import scipy.fft as sfft

from .core import (
    ConfigurationError,
    DimensionError,
    PsfImage,
    SensorFrame,
    ShutterSchedule,
    VideoTensor,
    problem_dims,
)

__all__ = [
    "ForwardOperator",
    "convolve2d_same",
    "apply_forward",
    "apply_adjoint",
    "build_dense_operator",
    "video_to_vec",
    "vec_to_video",
]

DENSE_ENTRY_CAP = 2**24


def _fft_sizes(n: int, p: int, c: int) -> int:
    """Smallest FFT length whose circular wraparound misses both crop windows.

    For an image of length n and a PSF of length p centered at c, the
    forward crop is [c, c+n) and the adjoint crop [p-1-c, p-1-c+n) out of
    a linear-convolution support [0, n+p-2]. Aliasing with FFT length P
    folds indices >= P onto [0, n+p-2-P]; both windows stay clean iff
    P >= max(n + p - 1 - c, n + c). P must also hold the whole PSF.
    """
    return sfft.next_fast_len(max(n + p - 1 - c, n + c, p))


def _as_video_array(scene) -> np.ndarray:
    data = scene.data if isinstance(scene, VideoTensor) else np.asarray(scene, dtype=np.float64)
    if data.ndim != 3:
        raise DimensionError(f"scene must be 3D, got shape {data.shape}")
    return data


def _as_frame_array(frame) -> np.ndarray:
    data = frame.data if isinstance(frame, SensorFrame) else np.asarray(frame, dtype=np.float64)
    if data.ndim != 2:
        raise DimensionError(f"frame must be 2D, got shape {data.shape}")
    return data


class ForwardOperator:
    """Linear map from a (n_y, n_x, n_t) scene to a single (n_y, n_x) frame.

    Immutable after construction and safe to share across threads. The
    padded PSF spectra for the forward and adjoint directions are cached
    at construction.
    """

    def __init__(self, psf: PsfImage, schedule: ShutterSchedule,
                 dims: tuple[int, int, int]):
        n_y, n_x, n_t = (int(d) for d in dims)
        if psf.dims[0] < n_y or psf.dims[1] < n_x:
            raise DimensionError(
                f"PSF dims {psf.dims} must cover the sensor dims {(n_y, n_x)}"
            )
        if schedule.n_rows != n_y:
            raise DimensionError(
                f"schedule covers {schedule.n_rows} rows, sensor has {n_y}"
            )
        if schedule.n_t != n_t:
            raise DimensionError(
                f"schedule defines {schedule.n_t} bins, dims declare {n_t}"
            )
        if not schedule.short_exposure_valid:
            raise ConfigurationError(
                "exposure_s exceeds row_period_s; overlapping-row exposure is "
                "not modeled (single-instant row sampling requires "
                "exposure_s <= row_period_s)"
            )
        self.psf = psf
        self.schedule = schedule
        self.dims = (n_y, n_x, n_t)

        cy, cx = psf.center
        p_y, p_x = psf.dims
        P = _fft_sizes(n_y, p_y, cy)
        Q = _fft_sizes(n_x, p_x, cx)
        self._fft_shape = (P, Q)
        self._fwd_crop = (cy, cx)
        self._adj_crop = (p_y - 1 - cy, p_x - 1 - cx)
        self._kf = sfft.rfft2(psf.data, s=(P, Q))
        self._kf_flip = sfft.rfft2(psf.data[::-1, ::-1], s=(P, Q))
        self._rows = np.arange(n_y)
        self._bins = np.asarray(schedule.row_to_bin, dtype=np.int64)

    def forward(self, scene: np.ndarray) -> np.ndarray:
        """Apply A: per-bin convolution followed by rolling-shutter row selection."""
        data = _as_video_array(scene)
        if data.shape != self.dims:
            raise DimensionError(f"scene shape {data.shape} != operator dims {self.dims}")
        n_y, n_x, _ = self.dims
        P, Q = self._fft_shape
        oy, ox = self._fwd_crop
        stack = np.ascontiguousarray(np.moveaxis(data, 2, 0))
        spec = sfft.rfft2(stack, s=(P, Q), axes=(1, 2))
        spec *= self._kf[None, :, :]
        conv = sfft.irfft2(spec, s=(P, Q), axes=(1, 2))[:, oy:oy + n_y, ox:ox + n_x]
        return conv[self._bins, self._rows, :]

    def adjoint(self, frame: np.ndarray) -> np.ndarray:
        """Apply A^T: scatter rows into per-bin images, correlate with the PSF."""
        data = _as_frame_array(frame)
        n_y, n_x, n_t = self.dims
        if data.shape != (n_y, n_x):
            raise DimensionError(
                f"frame shape {data.shape} != sensor dims {(n_y, n_x)}"
            )
        P, Q = self._fft_shape
        oy, ox = self._adj_crop
        scattered = np.zeros((n_t, n_y, n_x))
        scattered[self._bins, self._rows, :] = data
        spec = sfft.rfft2(scattered, s=(P, Q), axes=(1, 2))
        spec *= self._kf_flip[None, :, :]
        conv = sfft.irfft2(spec, s=(P, Q), axes=(1, 2))[:, oy:oy + n_y, ox:ox + n_x]
        return np.moveaxis(conv, 0, 2)


def convolve2d_same(image: np.ndarray, psf: PsfImage) -> np.ndarray:
    """Zero-padded linear convolution cropped so the PSF center tracks the input.

    A delta at pixel p maps to the PSF translated with its declared center
    at p, clipped at the borders. The PSF grid must be at least as large
    as the image grid.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise DimensionError(f"image must be 2D, got shape {img.shape}")
    if psf.dims[0] < img.shape[0] or psf.dims[1] < img.shape[1]:
        raise DimensionError(f"PSF dims {psf.dims} must cover image dims {img.shape}")
    n_y, n_x = img.shape
    cy, cx = psf.center
    P = _fft_sizes(n_y, psf.dims[0], cy)
    Q = _fft_sizes(n_x, psf.dims[1], cx)
    spec = sfft.rfft2(img, s=(P, Q)) * sfft.rfft2(psf.data, s=(P, Q))
    return sfft.irfft2(spec, s=(P, Q))[cy:cy + n_y, cx:cx + n_x]


def apply_forward(op: ForwardOperator, scene: VideoTensor | np.ndarray) -> SensorFrame:
    """Encode a scene into the single rolling-shutter frame b = A v."""
    return SensorFrame(op.forward(scene))


def apply_adjoint(op: ForwardOperator, frame: SensorFrame | np.ndarray) -> VideoTensor:
    """Apply the exact adjoint A^T to a sensor frame."""
    return VideoTensor(op.adjoint(frame), allow_negative=True)


def video_to_vec(scene: VideoTensor | np.ndarray) -> np.ndarray:
    """Flatten a scene with time as the slowest axis (frame after frame)."""
    return np.ascontiguousarray(np.moveaxis(_as_video_array(scene), 2, 0)).ravel()


def vec_to_video(vec: np.ndarray, dims: tuple[int, int, int]) -> np.ndarray:
    """Inverse of :func:`video_to_vec`; returns a plain (n_y, n_x, n_t) array."""
    n_y, n_x, n_t = dims
    arr = np.asarray(vec, dtype=np.float64).reshape(n_t, n_y, n_x)
    return np.moveaxis(arr, 0, 2)


def build_dense_operator(op: ForwardOperator, cap: int = DENSE_ENTRY_CAP) -> np.ndarray:
    """Materialize A as an (m, n) matrix by pushing unit tensors through forward.

    Intended as a test oracle for small instances only; refuses to build
    matrices with more than ``cap`` entries.
    """
    m, n = problem_dims(op.dims)
    if m * n > cap:
        raise ConfigurationError(
            f"dense operator would hold {m * n} entries, above the cap of {cap}"
        )
    n_y, n_x, n_t = op.dims
    dense = np.empty((m, n))
    basis = np.zeros((n_t, n_y, n_x))
    flat = basis.reshape(-1)
    for j in range(n):
        flat[j] = 1.0
        dense[:, j] = op.forward(np.moveaxis(basis, 0, 2)).ravel()
        flat[j] = 0.0
    return dense
