"""File IO: PFM float maps, instance-mask PNGs and a 16-bit PNG depth export.

PFM layout: "Pf" (grayscale) or "PF" (3-channel) header, "width height"
line, scale line (negative = little-endian), then 32-bit floats in
bottom-to-top row order.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image


def write_pfm(path, data: np.ndarray) -> None:
    """Write a (H, W) or (H, W, 3) float array as little-endian PFM."""
    data = np.asarray(data, dtype=np.float32)
    if data.ndim == 2:
        header = b"Pf"
    elif data.ndim == 3 and data.shape[2] == 3:
        header = b"PF"
    else:
        raise ValueError(f"PFM needs (H, W) or (H, W, 3), got {data.shape}")
    h, w = data.shape[:2]
    with open(path, "wb") as f:
        f.write(header + b"\n")
        f.write(f"{w} {h}\n".encode("ascii"))
        f.write(b"-1.0\n")  # negative scale: little-endian
        f.write(data[::-1].astype("<f4").tobytes())


def read_pfm(path) -> np.ndarray:
    """Read a PFM file; returns float32 (H, W) or (H, W, 3)."""
    with open(path, "rb") as f:
        header = f.readline().strip()
        if header == b"Pf":
            channels = 1
        elif header == b"PF":
            channels = 3
        else:
            raise ValueError(f"not a PFM file: header {header!r}")
        w, h = (int(tok) for tok in f.readline().split())
        scale = float(f.readline())
        endian = "<" if scale < 0 else ">"
        count = w * h * channels
        raw = f.read(count * 4)
        if len(raw) != count * 4:
            raise ValueError("truncated PFM payload")
        data = np.frombuffer(raw, dtype=endian + "f4").reshape(
            (h, w) if channels == 1 else (h, w, 3))
    return data[::-1].copy()


def write_mask_png(path, masks: np.ndarray) -> None:
    """8-bit single-channel PNG, pixel value = instance id (0 = background)."""
    masks = np.asarray(masks)
    if masks.min() < 0 or masks.max() > 255:
        raise ValueError("instance ids must fit in uint8")
    Image.fromarray(masks.astype(np.uint8), mode="L").save(path, format="PNG")


def read_mask_png(path) -> np.ndarray:
    img = Image.open(path)
    if img.mode != "L":
        raise ValueError(f"mask PNG must be single-channel 8-bit, got mode {img.mode}")
    return np.asarray(img, dtype=np.int32)


def write_depth_png16(path, depth: np.ndarray) -> None:
    """Viewer export: 16-bit PNG in millimeters (lossy above 65.535 m)."""
    depth = np.asarray(depth, dtype=np.float64)
    mm = np.clip(np.round(depth * 1000.0), 0, 65535).astype(np.uint16)
    Image.fromarray(mm).save(path, format="PNG")


def tree_digest(root) -> dict[str, str]:
    """sha256 of every file under root, keyed by relative path."""
    import hashlib

    root = Path(root)
    out = {}
    for p in sorted(root.rglob("*")):
        if p.is_file():
            out[str(p.relative_to(root))] = hashlib.sha256(p.read_bytes()).hexdigest()
    return out
