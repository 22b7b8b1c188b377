"""File formats: the RCS1 array container, PGM images, and JSON sidecars.

RCS1 container (bit-exact round trips, little-endian throughout):

    bytes 0-3   magic "RCS1"
    u32         rank
    u32 * rank  dims
    f64 * prod  data, C order

Video tensors are stored with time as the slowest axis, i.e. with dims
(n_t, n_y, n_x), so the file is a plain sequence of frames; the in-memory
layout stays (n_y, n_x, n_t).

PGM (binary P5, 8- or 16-bit) is supported for measured PSF input and for
per-frame export; 16-bit samples are big-endian per the Netpbm spec.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .core import ConfigurationError, DimensionError, VideoTensor

__all__ = [
    "MAGIC",
    "write_array",
    "read_array",
    "write_video",
    "read_video",
    "write_pgm",
    "read_pgm",
    "read_image",
    "export_frame_pgms",
    "write_json",
    "read_json",
]

MAGIC = b"RCS1"
_MAX_RANK = 8


def write_array(path, arr: np.ndarray) -> None:
    """Write an array to the RCS1 container."""
    data = np.ascontiguousarray(arr, dtype="<f8")
    if data.ndim < 1 or data.ndim > _MAX_RANK:
        raise DimensionError(f"container supports rank 1..{_MAX_RANK}, got {data.ndim}")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", data.ndim))
        fh.write(struct.pack(f"<{data.ndim}I", *data.shape))
        fh.write(data.tobytes())


def read_array(path) -> np.ndarray:
    """Read an array from the RCS1 container."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ConfigurationError(f"{path} is not an RCS1 container (magic {magic!r})")
        (rank,) = struct.unpack("<I", fh.read(4))
        if rank < 1 or rank > _MAX_RANK:
            raise ConfigurationError(f"{path} declares unsupported rank {rank}")
        dims = struct.unpack(f"<{rank}I", fh.read(4 * rank))
        count = int(np.prod(dims))
        payload = fh.read(8 * count)
        if len(payload) != 8 * count:
            raise ConfigurationError(f"{path} is truncated")
        return np.frombuffer(payload, dtype="<f8").reshape(dims).astype(np.float64)


def write_video(path, video: VideoTensor | np.ndarray) -> None:
    """Store a (n_y, n_x, n_t) tensor as a time-major frame sequence."""
    data = video.data if isinstance(video, VideoTensor) else np.asarray(video)
    if data.ndim != 3:
        raise DimensionError(f"video must be 3D, got shape {data.shape}")
    write_array(path, np.moveaxis(data, 2, 0))


def read_video(path) -> VideoTensor:
    """Read a time-major frame sequence back into a (n_y, n_x, n_t) tensor."""
    arr = read_array(path)
    if arr.ndim != 3:
        raise DimensionError(f"{path} holds a {arr.ndim}D array, need 3D video")
    return VideoTensor(np.moveaxis(arr, 0, 2), allow_negative=True)


def write_pgm(path, samples: np.ndarray, maxval: int = 65535) -> None:
    """Write integer samples as a binary (P5) PGM image."""
    data = np.asarray(samples)
    if data.ndim != 2:
        raise DimensionError(f"PGM image must be 2D, got shape {data.shape}")
    if not 0 < maxval < 65536:
        raise ConfigurationError(f"maxval must be in [1, 65535], got {maxval}")
    if data.min() < 0 or data.max() > maxval:
        raise ConfigurationError("PGM samples must lie in [0, maxval]")
    h, w = data.shape
    dtype = ">u2" if maxval > 255 else "u1"
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n{maxval}\n".encode("ascii"))
        fh.write(data.astype(dtype).tobytes())


def _pgm_tokens(blob: bytes):
    """Yield header tokens, skipping '#' comments, and the raster offset."""
    pos = 0
    tokens = []
    while len(tokens) < 4:
        while pos < len(blob) and blob[pos:pos + 1].isspace():
            pos += 1
        if pos < len(blob) and blob[pos:pos + 1] == b"#":
            while pos < len(blob) and blob[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ConfigurationError("truncated PGM header")
        tokens.append(blob[start:pos])
    return tokens, pos + 1  # exactly one whitespace byte after maxval


def read_pgm(path) -> np.ndarray:
    """Read a binary (P5) PGM image as float64 samples."""
    blob = Path(path).read_bytes()
    tokens, offset = _pgm_tokens(blob)
    if tokens[0] != b"P5":
        raise ConfigurationError(f"{path} is not a binary PGM (magic {tokens[0]!r})")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if not 0 < maxval < 65536:
        raise ConfigurationError(f"{path} declares invalid maxval {maxval}")
    dtype = ">u2" if maxval > 255 else "u1"
    count = w * h
    raster = blob[offset:offset + count * np.dtype(dtype).itemsize]
    if len(raster) != count * np.dtype(dtype).itemsize:
        raise ConfigurationError(f"{path} raster is truncated")
    return np.frombuffer(raster, dtype=dtype).reshape(h, w).astype(np.float64)


def read_image(path) -> np.ndarray:
    """Read a 2D image, sniffing RCS1 vs PGM from the magic bytes."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        return read_array(path)
    if head[:2] == b"P5":
        return read_pgm(path)
    raise ConfigurationError(f"{path} is neither an RCS1 container nor a binary PGM")


def export_frame_pgms(directory, video: VideoTensor | np.ndarray,
                      maxval: int = 65535) -> dict:
    """Write one PGM per time bin, linearly scaled to the full sample range.

    Returns the scaling record to store in the sidecar: original values
    are recovered as vmin + sample * (vmax - vmin) / maxval.
    """
    data = video.data if isinstance(video, VideoTensor) else np.asarray(video)
    if data.ndim != 3:
        raise DimensionError(f"video must be 3D, got shape {data.shape}")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    vmin = float(data.min())
    vmax = float(data.max())
    if vmax > vmin:
        scaled = np.rint((data - vmin) / (vmax - vmin) * maxval).astype(np.int64)
    else:
        scaled = np.zeros(data.shape, dtype=np.int64)
    n_t = data.shape[2]
    width = max(4, len(str(n_t - 1)))
    for t in range(n_t):
        write_pgm(directory / f"frame_{t:0{width}d}.pgm", scaled[:, :, t], maxval)
    return {"vmin": vmin, "vmax": vmax, "maxval": maxval, "frames": n_t}


def write_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
