"""Covariance region descriptors for RGB images.

Each pixel becomes ``[x, y, R, G, B, |W_x|, |W_y|, |W_xx|, |W_yy|]`` where
``x`` is the column index, ``y`` the row index (both 0-based, in pixels)
and ``W`` the BT.601 luma. Derivatives use the ``[-1, 0, 1] / 2`` and
``[1, -2, 1]`` stencils with replicated edges. The descriptor is the 9x9
sample covariance of those vectors plus a small ridge ``eps * I``.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Iterable, TextIO

import numpy as np

from ._errors import FormatError, InsufficientDataError, NumericalError
from .linalg import _read_rows, as_spd, format_matrix

__all__ = [
    "N_FEATURES",
    "ImageBuffer",
    "DescriptorConfig",
    "luma",
    "pixel_features",
    "region_covariance",
    "resize_bilinear",
    "extract",
    "read_ppm",
    "write_ppm",
    "read_image",
    "read_manifest",
    "write_descriptors",
    "read_descriptors",
]

N_FEATURES = 9
_LUMA = np.array([0.299, 0.587, 0.114])
# Lower bound on the per-feature variance scale used for the ridge; keeps
# eps * I admissible when every feature is constant.
_EPS_FLOOR = 1.0


@dataclass(frozen=True)
class ImageBuffer:
    """RGB image, ``pixels[y, x] = (R, G, B)`` with channels in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim == 2:
            px = np.repeat(px[:, :, None], 3, axis=2)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"expected an (h, w, 3) array, got shape {px.shape}")
        if px.shape[0] * px.shape[1] < 16:
            raise InsufficientDataError(f"image of {px.shape[1]}x{px.shape[0]} pixels is too small (need >= 16)")
        if not np.all(np.isfinite(px)) or px.min() < 0.0 or px.max() > 1.0:
            raise ValueError("channel values must lie in [0, 1]")
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class DescriptorConfig:
    resize_to: tuple[int, int] | None = None
    epsilon_scale: float = 1e-6
    unbiased: bool = True

    def __post_init__(self):
        if self.epsilon_scale < 0:
            raise ValueError(f"epsilon_scale must be >= 0, got {self.epsilon_scale}")
        if self.resize_to is not None and min(self.resize_to) < 1:
            raise ValueError(f"invalid resize target {self.resize_to}")

    def convention(self) -> str:
        """Compact, space-free description written into descriptor file headers."""
        size = "none" if self.resize_to is None else f"{self.resize_to[0]}x{self.resize_to[1]}"
        cov = "unbiased" if self.unbiased else "biased"
        return (f"features=xyRGB|Wx|Wy|Wxx|Wyy;coords=pixel0;gray=bt601;deriv=central;"
                f"pad=replicate;resize={size};interp=bilinear;eps={self.epsilon_scale!r};cov={cov}")


def luma(pixels: np.ndarray) -> np.ndarray:
    return pixels @ _LUMA


def pixel_features(img: ImageBuffer) -> np.ndarray:
    """Per-pixel 9-vectors in row-major pixel order, shape ``(h * w, 9)``."""
    px = img.pixels
    h, w = img.height, img.width
    W = np.pad(luma(px), 1, mode="edge")
    c = W[1:-1, 1:-1]
    left, right = W[1:-1, :-2], W[1:-1, 2:]
    up, down = W[:-2, 1:-1], W[2:, 1:-1]
    ys, xs = np.mgrid[0:h, 0:w]
    feats = [
        xs, ys, px[:, :, 0], px[:, :, 1], px[:, :, 2],
        np.abs(right - left) / 2.0,
        np.abs(down - up) / 2.0,
        np.abs(right - 2.0 * c + left),
        np.abs(down - 2.0 * c + up),
    ]
    return np.stack([f.astype(np.float64).ravel() for f in feats], axis=1)


def region_covariance(features, config: DescriptorConfig | None = None) -> np.ndarray:
    """Sample covariance of the rows of ``features`` plus ``eps * I``.

    ``eps = epsilon_scale * max(trace / f, 1)`` for ``f`` features, so the
    ridge is relative to the average feature variance.
    """
    config = config or DescriptorConfig()
    F = np.asarray(features, dtype=np.float64)
    if F.ndim == 1:
        F = F[:, None]
    N, f = F.shape
    if N < 2:
        raise InsufficientDataError(f"covariance needs at least 2 feature vectors, got {N}")
    D = F - F.mean(axis=0)
    C = (D.T @ D) / (N - 1 if config.unbiased else N)
    C = 0.5 * (C + C.T)
    eps = config.epsilon_scale * max(np.trace(C) / f, _EPS_FLOOR)
    return C + eps * np.eye(f)


def resize_bilinear(pixels: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """Bilinear resampling to ``size = (width, height)`` with pixel-center alignment."""
    pixels = np.asarray(pixels, dtype=np.float64)
    h, w = pixels.shape[:2]
    W, H = size
    if (W, H) == (w, h):
        return pixels.copy()

    def grid(n_out, n_in):
        src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        src = np.clip(src, 0.0, n_in - 1)
        lo = np.floor(src).astype(int)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, src - lo

    y0, y1, fy = grid(H, h)
    x0, x1, fx = grid(W, w)
    fx = fx[None, :, None]
    top = pixels[y0][:, x0] * (1 - fx) + pixels[y0][:, x1] * fx
    bot = pixels[y1][:, x0] * (1 - fx) + pixels[y1][:, x1] * fx
    fy = fy[:, None, None]
    return np.clip(top * (1 - fy) + bot * fy, 0.0, 1.0)


def extract(img: ImageBuffer, config: DescriptorConfig | None = None) -> np.ndarray:
    """Resize (if configured), compute pixel features, return the SPD descriptor."""
    config = config or DescriptorConfig()
    if config.resize_to is not None:
        img = ImageBuffer(resize_bilinear(img.pixels, config.resize_to))
    C = region_covariance(pixel_features(img), config)
    try:
        return as_spd(C, "descriptor")
    except NumericalError as exc:
        raise NumericalError(f"descriptor failed SPD admission after regularization: {exc}") from exc


# -- image input ------------------------------------------------------------

def _pnm_tokens(data: bytes, count: int, start: int) -> tuple[list[bytes], int]:
    toks: list[bytes] = []
    pos = start
    while len(toks) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        if pos >= len(data):
            raise FormatError("truncated PNM header")
        end = pos
        while end < len(data) and not data[end:end + 1].isspace():
            end += 1
        toks.append(data[pos:end])
        pos = end
    return toks, pos


def read_ppm(path: str | os.PathLike) -> ImageBuffer:
    """Read a binary or ASCII PPM (P6/P3) or PGM (P5/P2) file."""
    with open(path, "rb") as fh:
        data = fh.read()
    magic = data[:2]
    if magic not in (b"P2", b"P3", b"P5", b"P6"):
        raise FormatError(f"{path}: not a PPM/PGM file")
    channels = 3 if magic in (b"P3", b"P6") else 1
    (w, h, maxval), pos = _pnm_tokens(data, 3, 2)
    try:
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError:
        raise FormatError(f"{path}: malformed header") from None
    if w <= 0 or h <= 0 or not 0 < maxval < 65536:
        raise FormatError(f"{path}: invalid dimensions or maxval")
    count = w * h * channels
    if magic in (b"P5", b"P6"):
        pos += 1  # single whitespace byte after maxval
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        raw = np.frombuffer(data, dtype=dtype, count=count, offset=pos) if len(data) - pos >= count * dtype.itemsize else None
        if raw is None:
            raise FormatError(f"{path}: truncated pixel data")
        vals = raw.astype(np.float64)
    else:
        try:
            vals = np.array([int(t) for t in data[pos:].split()[:count]], dtype=np.float64)
        except ValueError:
            raise FormatError(f"{path}: non-integer sample in ASCII pixel data") from None
        if vals.size != count:
            raise FormatError(f"{path}: truncated pixel data")
    px = (vals / maxval).reshape(h, w, channels)
    return ImageBuffer(px if channels == 3 else px[:, :, 0])


def write_ppm(path: str | os.PathLike, pixels: np.ndarray) -> None:
    """Write an 8-bit binary PPM."""
    px = np.asarray(pixels, dtype=np.float64)
    q = np.round(np.clip(px, 0.0, 1.0) * 255).astype(np.uint8)
    h, w = q.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(q.tobytes())


def read_image(path: str | os.PathLike) -> ImageBuffer:
    """Read PPM/PGM natively; other formats (e.g. PNG) need Pillow."""
    with open(path, "rb") as fh:
        head = fh.read(2)
    if head in (b"P2", b"P3", b"P5", b"P6"):
        return read_ppm(path)
    try:
        from PIL import Image
    except ImportError:
        raise FormatError(f"{path}: only PPM/PGM are supported without Pillow") from None
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    except OSError as exc:
        raise FormatError(f"{path}: {exc}") from None
    return ImageBuffer(arr)


def read_manifest(fh: TextIO | Iterable[str]) -> list[tuple[str, str | None]]:
    """``path [label]`` per line; blank lines and ``#`` comments are ignored."""
    out = []
    for raw in fh:
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) > 2:
            raise FormatError(f"manifest line {raw.strip()!r}: expected 'path [label]'")
        out.append((parts[0], parts[1] if len(parts) == 2 else None))
    return out


# -- descriptor files -------------------------------------------------------

_HEADER = "spd-descriptors v1"


def write_descriptors(records: Iterable[tuple[str, np.ndarray]], fh: TextIO,
                      convention: str, n: int | None = None) -> None:
    """Header line, then per record an identifier line and the matrix text."""
    records = list(records)
    if n is None:
        n = records[0][1].shape[0] if records else N_FEATURES
    if any(ch.isspace() for ch in convention):
        raise ValueError("convention string must not contain whitespace")
    fh.write(f"{_HEADER} n={n} convention={convention}\n")
    for ident, P in records:
        if "\n" in ident or not ident.strip():
            raise ValueError(f"invalid identifier {ident!r}")
        fh.write(f"{ident}\n")
        fh.write(format_matrix(P))


def read_descriptors(fh: TextIO) -> tuple[list[str], list[np.ndarray], dict]:
    """Parse a descriptor file into identifiers, matrices and header fields."""
    lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith(_HEADER):
        raise FormatError(f"descriptor file must start with {_HEADER!r}")
    header = {}
    for tok in lines[0][len(_HEADER):].split():
        key, _, val = tok.partition("=")
        header[key] = val
    try:
        n = int(header["n"])
    except (KeyError, ValueError):
        raise FormatError("descriptor header lacks n=<order>") from None
    ids, mats = [], []
    pos = 1
    while pos < len(lines):
        ident = lines[pos].strip()
        block = lines[pos + 1: pos + 2 + n]
        M = _read_rows(block, f"descriptor {ident!r}")
        if M.shape[0] != n:
            raise FormatError(f"descriptor {ident!r} has order {M.shape[0]}, header says {n}")
        ids.append(ident)
        mats.append(M)
        pos += 2 + n
    return ids, mats, header
