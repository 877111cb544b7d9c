"""Core data types and container formats for hyperspectral processing.

A hyperspectral cube is stored band-major as a float32 array of shape
(bands, height, width) with reflectance values in [0, 1] and a strictly
increasing wavelength axis in nanometers.  RGB images use the same
plane-major layout with exactly three channels.  Both types are immutable
after construction and reject non-finite input.

Two container formats are implemented here: a raw binary cube container
with a JSON header (bit-exact round trips) and 8/16-bit RGB PNG via
OpenCV.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import NamedTuple

import cv2
import numpy as np

# Values within this slack of the unit interval are snapped without being
# counted as clamped; it absorbs float round-off from upstream arithmetic.
CLAMP_SLACK = 1e-9

CUBE_MAGIC = b"HSIC"

# Target wavelengths(nm) used to pick RGB planes out of a cube.
RGB_TARGETS_NM = (660.0, 550.0, 470.0)


class ContainerError(ValueError):
    """Base class for cube container parse failures."""


class MagicError(ContainerError):
    """File does not start with the expected magic bytes."""


class TruncatedError(ContainerError):
    """Payload or header is shorter (or longer) than the header declares."""


class HeaderError(ContainerError):
    """Header JSON is malformed or declares inconsistent fields."""


class WavelengthOrderError(ContainerError):
    """Wavelength axis in the file is not strictly increasing."""


class NonFinitePayloadError(ContainerError):
    """Payload contains NaN or infinite samples."""


class UnsupportedImageError(ValueError):
    """Image file is not a plain 3-channel 8-bit or 16-bit image."""


def clamp_unit(values: np.ndarray) -> tuple[np.ndarray, int]:
    """Clamp an array into [0, 1] and count genuinely out-of-range samples.

    Samples within CLAMP_SLACK of the interval are snapped silently so that
    round-off from float arithmetic does not inflate the count.  Returns a
    float64 copy and the number of clamped samples.
    """
    arr = np.asarray(values, dtype=np.float64)
    outside = int(np.count_nonzero((arr < -CLAMP_SLACK) | (arr > 1.0 + CLAMP_SLACK)))
    return np.clip(arr, 0.0, 1.0), outside


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


class PixelCoord(NamedTuple):
    """Integer lattice coordinate, row first."""

    y: int
    x: int


@dataclass(frozen=True)
class HyperCube:
    """Immutable band-major reflectance cube.

    data holds float32 planes of shape (bands, height, width) with values
    in [0, 1].  wavelengths_nm is float64, strictly increasing, one entry
    per band.  clamped counts input samples that fell outside the unit
    interval by more than CLAMP_SLACK before construction clipped them.
    """

    data: np.ndarray
    wavelengths_nm: np.ndarray
    clamped: int = 0

    def __post_init__(self) -> None:
        data = np.asarray(self.data)
        if data.ndim != 3:
            msg = f"cube data must be 3-d (bands, height, width), got shape {data.shape}"
            raise ValueError(msg)
        if min(data.shape) < 1:
            msg = f"cube dimensions must be positive, got shape {data.shape}"
            raise ValueError(msg)
        if not np.all(np.isfinite(data)):
            raise ValueError("cube data contains NaN or infinite samples")
        wl = np.asarray(self.wavelengths_nm, dtype=np.float64).reshape(-1)
        if wl.shape[0] != data.shape[0]:
            msg = f"expected {data.shape[0]} wavelengths, got {wl.shape[0]}"
            raise ValueError(msg)
        if not np.all(np.isfinite(wl)):
            raise ValueError("wavelengths contain NaN or infinite entries")
        if wl.shape[0] > 1 and not np.all(np.diff(wl) > 0):
            raise ValueError("wavelengths must be strictly increasing")
        clipped, count = clamp_unit(data)
        object.__setattr__(self, "data", _freeze(clipped.astype(np.float32)))
        object.__setattr__(self, "wavelengths_nm", _freeze(wl))
        object.__setattr__(self, "clamped", int(self.clamped) + count)

    @property
    def bands(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def pixels(self) -> int:
        return self.height * self.width

    def band(self, index: int) -> np.ndarray:
        """Single band plane of shape (height, width), float32, read-only."""
        return self.data[index]

    def pixel_matrix(self) -> np.ndarray:
        """Spectra as a float64 matrix of shape (pixels, bands).

        Pixels are ordered row-major, so pixel (y, x) sits at row y*width+x.
        """
        return self.data.reshape(self.bands, -1).T.astype(np.float64)

    @classmethod
    def from_pixel_matrix(
        cls,
        matrix: np.ndarray,
        height: int,
        width: int,
        wavelengths_nm: np.ndarray,
    ) -> "HyperCube":
        """Build a cube from a (pixels, bands) matrix in row-major order."""
        mat = np.asarray(matrix, dtype=np.float64)
        if mat.ndim != 2 or mat.shape[0] != height * width:
            msg = f"expected matrix of shape ({height * width}, bands), got {mat.shape}"
            raise ValueError(msg)
        data = mat.T.reshape(mat.shape[1], height, width)
        return cls(data=data, wavelengths_nm=wavelengths_nm)


@dataclass(frozen=True)
class RgbImage:
    """Immutable 3-channel image, planes of shape (3, height, width).

    Channel order is red, green, blue.  Values are float32 in [0, 1];
    clamped counts samples clipped at construction.
    """

    data: np.ndarray
    clamped: int = 0

    def __post_init__(self) -> None:
        data = np.asarray(self.data)
        if data.ndim != 3 or data.shape[0] != 3:
            msg = f"image data must have shape (3, height, width), got {data.shape}"
            raise ValueError(msg)
        if data.shape[1] < 1 or data.shape[2] < 1:
            msg = f"image dimensions must be positive, got shape {data.shape}"
            raise ValueError(msg)
        if not np.all(np.isfinite(data)):
            raise ValueError("image data contains NaN or infinite samples")
        clipped, count = clamp_unit(data)
        object.__setattr__(self, "data", _freeze(clipped.astype(np.float32)))
        object.__setattr__(self, "clamped", int(self.clamped) + count)

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def pixels(self) -> int:
        return self.height * self.width

    def pixel_matrix(self) -> np.ndarray:
        """Colors as a float64 matrix of shape (pixels, 3), row-major."""
        return self.data.reshape(3, -1).T.astype(np.float64)


def rgb_band_indices(wavelengths_nm: np.ndarray) -> tuple[int, int, int]:
    """Indices of the bands nearest 660, 550 and 470 nm.

    Distance ties resolve to the lower band index.
    """
    wl = np.asarray(wavelengths_nm, dtype=np.float64).reshape(-1)
    picks = []
    for target in RGB_TARGETS_NM:
        picks.append(int(np.argmin(np.abs(wl - target))))
    return picks[0], picks[1], picks[2]


def project_rgb(cube: HyperCube) -> RgbImage:
    """Project a cube to RGB by picking nearest-wavelength band planes.

    Requires at least three bands.  Red, green and blue channels come from
    the bands closest to 660, 550 and 470 nm respectively.
    """
    if cube.bands < 3:
        msg = f"RGB projection needs at least 3 bands, cube has {cube.bands}"
        raise ValueError(msg)
    r, g, b = rgb_band_indices(cube.wavelengths_nm)
    planes = np.stack([cube.data[r], cube.data[g], cube.data[b]])
    return RgbImage(data=planes)


# ---------------------------------------------------------------------------
# Binary cube container
# ---------------------------------------------------------------------------


def _header_bytes(cube: HyperCube) -> bytes:
    header = {
        "height": cube.height,
        "width": cube.width,
        "bands": cube.bands,
        "wavelengths_nm": [float(w) for w in cube.wavelengths_nm],
        "dtype": "f32le",
    }
    return json.dumps(header, separators=(",", ":"), sort_keys=True).encode("utf-8")


def save_cube(cube: HyperCube, path: str) -> None:
    """Write a cube to the binary container.

    Layout: 4 magic bytes, little-endian u32 header length, UTF-8 JSON
    header, then band-major float32 little-endian samples.  Round trips
    are bit-exact.
    """
    header = _header_bytes(cube)
    payload = np.ascontiguousarray(cube.data, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(CUBE_MAGIC)
        fh.write(np.uint32(len(header)).astype("<u4").tobytes())
        fh.write(header)
        fh.write(payload)


def load_cube(path: str) -> HyperCube:
    """Read a cube from the binary container written by save_cube.

    Raises MagicError, HeaderError, WavelengthOrderError, TruncatedError
    or NonFinitePayloadError for the corresponding malformed inputs.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 8:
        raise TruncatedError("file too short to hold magic and header length")
    if blob[:4] != CUBE_MAGIC:
        msg = f"bad magic {blob[:4]!r}, expected {CUBE_MAGIC!r}"
        raise MagicError(msg)
    header_len = int(np.frombuffer(blob[4:8], dtype="<u4")[0])
    if len(blob) < 8 + header_len:
        raise TruncatedError("header is shorter than its declared length")
    try:
        header = json.loads(blob[8 : 8 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise HeaderError(f"header is not valid JSON: {exc}") from exc
    try:
        height = int(header["height"])
        width = int(header["width"])
        bands = int(header["bands"])
        wavelengths = np.asarray(header["wavelengths_nm"], dtype=np.float64)
        dtype = header["dtype"]
    except (KeyError, TypeError, ValueError) as exc:
        raise HeaderError(f"header is missing or mistypes a field: {exc}") from exc
    if dtype != "f32le":
        raise HeaderError(f"unsupported payload dtype {dtype!r}")
    if height < 1 or width < 1 or bands < 1:
        raise HeaderError("header declares non-positive dimensions")
    if wavelengths.shape != (bands,):
        raise HeaderError("wavelength count does not match declared band count")
    if bands > 1 and not np.all(np.diff(wavelengths) > 0):
        raise WavelengthOrderError("wavelengths must be strictly increasing")
    expected = bands * height * width * 4
    payload = blob[8 + header_len :]
    if len(payload) < expected:
        msg = f"payload holds {len(payload)} bytes, header declares {expected}"
        raise TruncatedError(msg)
    if len(payload) > expected:
        msg = f"{len(payload) - expected} trailing bytes after declared payload"
        raise TruncatedError(msg)
    samples = np.frombuffer(payload, dtype="<f4").reshape(bands, height, width)
    if not np.all(np.isfinite(samples)):
        raise NonFinitePayloadError("payload contains NaN or infinite samples")
    return HyperCube(data=samples, wavelengths_nm=wavelengths)


# ---------------------------------------------------------------------------
# RGB PNG input and output
# ---------------------------------------------------------------------------


def load_rgb(path: str) -> RgbImage:
    """Load an 8-bit or 16-bit 3-channel PNG as a float image in [0, 1].

    Integer code k maps to k / max_code.  Grayscale, paletted and alpha
    images are rejected with UnsupportedImageError.
    """
    raw = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise OSError(f"cannot read image file {path!r}")
    if raw.ndim != 3 or raw.shape[2] != 3:
        msg = f"expected a 3-channel image, got array shape {raw.shape}"
        raise UnsupportedImageError(msg)
    if raw.dtype == np.uint8:
        max_code = 255.0
    elif raw.dtype == np.uint16:
        max_code = 65535.0
    else:
        raise UnsupportedImageError(f"unsupported sample dtype {raw.dtype}")
    rgb = raw[:, :, ::-1].astype(np.float64) / max_code
    return RgbImage(data=np.moveaxis(rgb, 2, 0))


def save_rgb(image: RgbImage, path: str, bit_depth: int = 8) -> None:
    """Write an image as an 8-bit or 16-bit PNG.

    Value v maps to code floor(v * max_code + 0.5), so ties round up.
    """
    if bit_depth == 8:
        max_code = 255.0
        dtype = np.uint8
    elif bit_depth == 16:
        max_code = 65535.0
        dtype = np.uint16
    else:
        raise ValueError(f"bit_depth must be 8 or 16, got {bit_depth}")
    values = image.data.astype(np.float64)
    codes = np.floor(values * max_code + 0.5)
    codes = np.clip(codes, 0.0, max_code).astype(dtype)
    bgr = np.moveaxis(codes, 0, 2)[:, :, ::-1]
    if not cv2.imwrite(path, np.ascontiguousarray(bgr)):
        raise OSError(f"cannot write image file {path!r}")
