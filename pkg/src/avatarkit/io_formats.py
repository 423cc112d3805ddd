"""File formats: float-grid binary (depth/flow), PNG masks/images, JSON reports.

Float grid binary layout (little endian), 16-byte header:

    bytes 0..3   magic b"FGR1"
    bytes 4..7   uint32 width
    bytes 8..11  uint32 height
    bytes 12..15 uint32 channels
    then height*width*channels float32 values, row-major, channel-minor

Depth maps use channels=1 with NaN as the background sentinel; flow fields
use channels=2.
"""

from __future__ import annotations

import struct

import numpy as np
from PIL import Image

from .errors import MeshFormatError

MAGIC = b"FGR1"


def save_float_grid(path, values):
    a = np.asarray(values, dtype=np.float32)
    if a.ndim == 2:
        a = a[:, :, None]
    h, w, c = a.shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", w, h, c))
        fh.write(a.astype("<f4").tobytes())


def load_float_grid(path):
    with open(path, "rb") as fh:
        head = fh.read(16)
        if len(head) != 16 or head[:4] != MAGIC:
            raise MeshFormatError(f"{path}: not a float-grid file")
        w, h, c = struct.unpack("<III", head[4:])
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != w * h * c:
        raise MeshFormatError(f"{path}: truncated float-grid payload")
    a = data.reshape(h, w, c).astype(np.float64)
    return a[:, :, 0] if c == 1 else a


def save_mask_png(path, bits):
    img = Image.fromarray(np.where(np.asarray(bits, dtype=bool), 255, 0).astype(np.uint8), mode="L")
    img.save(path)


def load_mask_png(path):
    img = Image.open(path).convert("L")
    return np.asarray(img) >= 128


def save_image_png(path, values):
    """Save an (H, W) or (H, W, 3) float image in [0, 1] as 8-bit PNG."""
    a = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    b = np.round(a * 255.0).astype(np.uint8)
    mode = "L" if b.ndim == 2 else "RGB"
    Image.fromarray(b, mode=mode).save(path)


def load_image_png(path):
    """Load a PNG as float in [0, 1]; RGB when the file has color."""
    img = Image.open(path)
    if img.mode in ("L", "I;16", "I"):
        return np.asarray(img.convert("L"), dtype=np.float64) / 255.0
    return np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0


def save_depth_png(path, values):
    """Normalized depth preview (inspection only, not bit-exact)."""
    v = np.asarray(values, dtype=np.float64)
    fg = np.isfinite(v)
    out = np.zeros(v.shape)
    if fg.any():
        lo, hi = v[fg].min(), v[fg].max()
        span = hi - lo if hi > lo else 1.0
        out[fg] = 0.1 + 0.9 * (v[fg] - lo) / span
    save_image_png(path, out)
