"""Cube, ground-truth and label-map file I/O plus a synthetic scene generator.

Formats
-------
* Cubes: a JSON sidecar ``{width, height, bands, dtype: "f32", interleave: "bsq",
  data: "<raw file, relative to the sidecar>"}`` next to a little-endian float32
  band-sequential raw file.
* Ground truth / predictions: Netpbm PGM (P2 or P5), pixel value = class id,
  0 = unlabeled.
* Rendered maps: Netpbm PPM (P6).
"""
from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "HsiCube",
    "GroundTruth",
    "ClassPalette",
    "FormatError",
    "load_cube",
    "save_cube",
    "read_pgm",
    "write_pgm",
    "read_ppm",
    "write_ppm",
    "load_ground_truth",
    "save_ground_truth",
    "generate_synthetic_scene",
    "render_label_map",
    "decode_label_map",
]


class FormatError(ValueError):
    """A file does not match the expected layout."""


@dataclass
class HsiCube:
    """Hyperspectral raster stored band-sequential, ``data.shape == (bands, height, width)``."""

    data: np.ndarray
    band_names: list[str] | None = None

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != 3:
            raise ValueError(f"cube data must be 3-D (bands, height, width), got {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("cube contains non-finite samples")
        if self.band_names is not None and len(self.band_names) != self.bands:
            raise ValueError("band_names length does not match band count")

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
    def samples(self) -> np.ndarray:
        """Flat BSQ sample vector of length width*height*bands."""
        return self.data.reshape(-1)

    def pixels(self) -> np.ndarray:
        """Pixel matrix of shape (height*width, bands), rows in raster order."""
        return self.data.reshape(self.bands, -1).T

    @classmethod
    def from_pixels(cls, pixels, height, width, band_names=None):
        pixels = np.asarray(pixels)
        return cls(pixels.T.reshape(pixels.shape[1], height, width), band_names)


@dataclass
class GroundTruth:
    """Per-pixel class ids (0 = unlabeled, 1..num_classes)."""

    labels: np.ndarray
    num_classes: int = 0

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.ndim != 2:
            raise ValueError("ground truth must be a 2-D label image")
        if self.labels.size and self.labels.min() < 0:
            raise ValueError("negative class id in ground truth")
        top = int(self.labels.max()) if self.labels.size else 0
        if top == 0:
            raise ValueError("no labeled class present")
        if not self.num_classes:
            self.num_classes = top
        if top > self.num_classes:
            raise ValueError(f"class id {top} exceeds num_classes={self.num_classes}")
        present = np.unique(self.labels)
        missing = sorted(set(range(1, self.num_classes + 1)) - set(present.tolist()))
        if missing:
            raise ValueError(f"classes {missing} have no pixels")

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


@dataclass
class ClassPalette:
    colors: dict[int, tuple[int, int, int]]
    background: tuple[int, int, int] = (0, 0, 0)

    def __post_init__(self):
        self.colors = {int(k): tuple(int(c) for c in v) for k, v in self.colors.items()}
        self.background = tuple(int(c) for c in self.background)
        for rgb in list(self.colors.values()) + [self.background]:
            if len(rgb) != 3 or not all(0 <= c <= 255 for c in rgb):
                raise ValueError(f"invalid rgb triple {rgb}")
        if len(set(self.colors.values())) != len(self.colors):
            raise ValueError("palette colors must be distinct per class")

    @classmethod
    def default(cls, num_classes: int) -> "ClassPalette":
        """Distinct, deterministic colors spread around the hue circle."""
        import colorsys

        colors = {}
        for j in range(num_classes):
            hue = (j * 0.618033988749895) % 1.0
            value = 1.0 if j % 2 == 0 else 0.75
            r, g, b = colorsys.hsv_to_rgb(hue, 0.85, value)
            colors[j + 1] = (round(r * 255), round(g * 255), round(b * 255))
        # collisions are possible after rounding for large palettes
        seen = set()
        for j, rgb in colors.items():
            while rgb in seen or rgb == (0, 0, 0):
                rgb = ((rgb[0] + 1) % 256, rgb[1], rgb[2])
            colors[j] = rgb
            seen.add(rgb)
        return cls(colors)

    @classmethod
    def load(cls, path) -> "ClassPalette":
        with open(path) as fh:
            spec = json.load(fh)
        return cls(spec["colors"], tuple(spec.get("background", (0, 0, 0))))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump({"background": list(self.background),
                       "colors": {str(k): list(v) for k, v in sorted(self.colors.items())}},
                      fh, indent=2)


# --------------------------------------------------------------------------
# cubes

def load_cube(header_path) -> HsiCube:
    """Read a cube from its JSON sidecar and float32 BSQ raw file."""
    header_path = Path(header_path)
    try:
        with open(header_path) as fh:
            header = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{header_path}: malformed header ({exc})") from None
    if not isinstance(header, dict):
        raise FormatError(f"{header_path}: header must be a JSON object")
    try:
        width, height, bands = (int(header[k]) for k in ("width", "height", "bands"))
        raw_name = header["data"]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{header_path}: missing or invalid field {exc}") from None
    if header.get("dtype", "f32") != "f32":
        raise FormatError(f"{header_path}: unsupported dtype {header['dtype']!r}")
    if header.get("interleave", "bsq") != "bsq":
        raise FormatError(f"{header_path}: unsupported interleave {header['interleave']!r}")
    if min(width, height, bands) < 1:
        raise FormatError(f"{header_path}: non-positive dimension")
    raw_path = header_path.parent / raw_name
    raw = raw_path.read_bytes()
    expected = width * height * bands * 4
    if len(raw) != expected:
        raise FormatError(f"{raw_path}: size mismatch, expected {expected} bytes, found {len(raw)}")
    data = np.frombuffer(raw, dtype="<f4").astype(np.float32).reshape(bands, height, width)
    if not np.all(np.isfinite(data)):
        raise FormatError(f"{raw_path}: non-finite samples")
    return HsiCube(data, header.get("band_names"))


def save_cube(cube: HsiCube, header_path, raw_name=None):
    """Write ``cube`` as float32 BSQ; samples are cast to float32."""
    header_path = Path(header_path)
    raw_name = raw_name or header_path.with_suffix(".raw").name
    data = np.ascontiguousarray(cube.data, dtype="<f4")
    (header_path.parent / raw_name).write_bytes(data.tobytes())
    header = {"width": cube.width, "height": cube.height, "bands": cube.bands,
              "dtype": "f32", "interleave": "bsq", "data": raw_name}
    if cube.band_names is not None:
        header["band_names"] = list(cube.band_names)
    with open(header_path, "w") as fh:
        json.dump(header, fh, indent=2)


# --------------------------------------------------------------------------
# netpbm

def _pnm_tokens(buf: bytes, count: int):
    """Parse ``count`` whitespace-separated header tokens; returns (tokens, offset)."""
    tokens = []
    pos = 0
    n = len(buf)
    while len(tokens) < count:
        while pos < n and buf[pos:pos + 1].isspace():
            pos += 1
        if pos >= n:
            raise FormatError("truncated netpbm header")
        if buf[pos:pos + 1] == b"#":
            while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not buf[pos:pos + 1].isspace() and buf[pos:pos + 1] != b"#":
            pos += 1
        tokens.append(buf[start:pos])
    return tokens, pos


def _read_pnm(path, magics):
    buf = Path(path).read_bytes()
    tokens, pos = _pnm_tokens(buf, 4)
    magic = tokens[0].decode("ascii", "replace")
    if magic not in magics:
        raise FormatError(f"{path}: unsupported netpbm magic {magic!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise FormatError(f"{path}: non-integer header field") from None
    if width < 1 or height < 1:
        raise FormatError(f"{path}: non-positive image size")
    if not 0 < maxval <= 65535:
        raise FormatError(f"{path}: maxval {maxval} outside 1..65535")
    channels = 3 if magic in ("P3", "P6") else 1
    count = width * height * channels
    if magic in ("P2", "P3"):
        body = re.sub(rb"#[^\r\n]*", b" ", buf[pos:])
        try:
            values = np.array([int(t) for t in body.split()], dtype=np.int64)
        except ValueError:
            raise FormatError(f"{path}: non-integer pixel value") from None
        if values.size != count:
            raise FormatError(f"{path}: expected {count} values, found {values.size}")
    else:
        pos += 1  # single whitespace byte after maxval
        dtype = ">u2" if maxval > 255 else "u1"
        itemsize = np.dtype(dtype).itemsize
        raw = buf[pos:pos + count * itemsize]
        if len(raw) != count * itemsize:
            raise FormatError(f"{path}: truncated raster")
        values = np.frombuffer(raw, dtype=dtype).astype(np.int64)
    if values.size and values.max() > maxval:
        raise FormatError(f"{path}: pixel value exceeds maxval")
    shape = (height, width, 3) if channels == 3 else (height, width)
    return values.reshape(shape), maxval


def read_pgm(path) -> np.ndarray:
    """Read a P2/P5 graymap into an int64 array of shape (height, width)."""
    values, _ = _read_pnm(path, ("P2", "P5"))
    return values


def write_pgm(path, image, binary=True):
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError("PGM image must be 2-D")
    if image.size and (image.min() < 0 or image.max() > 65535):
        raise ValueError("PGM values must lie in 0..65535")
    height, width = image.shape
    maxval = max(int(image.max()) if image.size else 0, 1)
    if binary:
        dtype = ">u2" if maxval > 255 else "u1"
        header = f"P5\n{width} {height}\n{maxval}\n".encode("ascii")
        Path(path).write_bytes(header + image.astype(dtype).tobytes())
    else:
        lines = [f"P2\n{width} {height}\n{maxval}"]
        lines += [" ".join(str(int(v)) for v in row) for row in image]
        Path(path).write_text("\n".join(lines) + "\n")


def read_ppm(path) -> np.ndarray:
    """Read a P3/P6 pixmap into an int64 array of shape (height, width, 3)."""
    values, _ = _read_pnm(path, ("P3", "P6"))
    return values


def write_ppm(path, rgb):
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError("PPM image must have shape (height, width, 3)")
    if rgb.size and (rgb.min() < 0 or rgb.max() > 255):
        raise ValueError("PPM values must lie in 0..255")
    height, width, _ = rgb.shape
    header = f"P6\n{width} {height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + rgb.astype(np.uint8).tobytes())


def load_ground_truth(path) -> GroundTruth:
    """Ground truth from a PGM; num_classes is the largest pixel value."""
    return GroundTruth(read_pgm(path))


def save_ground_truth(gt: GroundTruth, path, binary=True):
    write_pgm(path, gt.labels, binary=binary)


# --------------------------------------------------------------------------
# label maps

def render_label_map(labels, palette: ClassPalette, path):
    """Write a class map as a P6 image, one pixel per label."""
    labels = np.asarray(labels)
    unknown = set(np.unique(labels).tolist()) - set(palette.colors) - {0}
    if unknown:
        raise ValueError(f"class ids {sorted(unknown)} not in palette")
    lut_size = max([0, *palette.colors, int(labels.max()) if labels.size else 0]) + 1
    lut = np.zeros((lut_size, 3), dtype=np.uint8)
    lut[0] = palette.background
    for cls, rgb in palette.colors.items():
        lut[cls] = rgb
    write_ppm(path, lut[labels])


def decode_label_map(rgb, palette: ClassPalette) -> np.ndarray:
    """Inverse of :func:`render_label_map` for an injective palette."""
    rgb = np.asarray(rgb, dtype=np.int64)
    inverse = {palette.background: 0}
    for cls, color in palette.colors.items():
        if color in inverse:
            raise ValueError("palette is not injective")
        inverse[color] = cls
    keys = (rgb[..., 0] << 16) | (rgb[..., 1] << 8) | rgb[..., 2]
    out = np.full(keys.shape, -1, dtype=np.int64)
    for (r, g, b), cls in inverse.items():
        out[keys == ((r << 16) | (g << 8) | b)] = cls
    if (out < 0).any():
        raise ValueError("image contains colors outside the palette")
    return out


# --------------------------------------------------------------------------
# synthetic scenes

def _block_layout(width, height, num_classes):
    """Split the image into ``num_classes`` rectangles: vertical strips, each cut horizontally."""
    strips = int(np.ceil(np.sqrt(num_classes)))
    strips = min(strips, width)
    per_strip = [num_classes // strips + (1 if s < num_classes % strips else 0) for s in range(strips)]
    if min(per_strip) < 1 or max(per_strip) > height:
        raise ValueError(f"cannot partition {width}x{height} image into {num_classes} blocks")
    x_edges = np.linspace(0, width, strips + 1).round().astype(int)
    blocks = []
    for s, count in enumerate(per_strip):
        y_edges = np.linspace(0, height, count + 1).round().astype(int)
        for t in range(count):
            blocks.append((y_edges[t], y_edges[t + 1], x_edges[s], x_edges[s + 1]))
    return blocks


def _signatures(rng, num_classes, bands, min_angle_deg=30.0, max_tries=10000):
    cos_limit = np.cos(np.deg2rad(min_angle_deg))
    sigs = []
    tries = 0
    while len(sigs) < num_classes:
        tries += 1
        if tries > max_tries:
            raise ValueError(f"cannot draw {num_classes} signatures {min_angle_deg} deg apart in {bands} bands")
        v = rng.standard_normal(bands)
        norm = np.linalg.norm(v)
        if norm == 0:
            continue
        v /= norm
        if all(np.dot(v, s) <= cos_limit for s in sigs):
            sigs.append(v)
    return np.array(sigs)


def generate_synthetic_scene(width, height, bands, num_classes, noise_sigma, seed):
    """Blocked scene with one unit-norm spectral signature per class plus Gaussian noise.

    Returns ``(HsiCube, GroundTruth)``; the result is a pure function of the arguments.
    """
    if num_classes < 1 or num_classes > width * height:
        raise ValueError("num_classes must lie in 1..width*height")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be nonnegative")
    rng = np.random.default_rng(seed)
    blocks = _block_layout(width, height, num_classes)
    sigs = _signatures(rng, num_classes, bands)
    labels = np.zeros((height, width), dtype=np.int64)
    for cls, (y0, y1, x0, x1) in enumerate(blocks, start=1):
        labels[y0:y1, x0:x1] = cls
    pixels = sigs[labels.reshape(-1) - 1]
    if noise_sigma > 0:
        pixels = pixels + noise_sigma * rng.standard_normal(pixels.shape)
    cube = HsiCube.from_pixels(pixels, height, width)
    return cube, GroundTruth(labels, num_classes)


def remove_quietly(*paths):
    for p in paths:
        try:
            os.remove(p)
        except OSError:
            pass
