"""Instance centerness maps and the (1 - centerness) feature weighting.

Centerness of a pixel inside an instance is sqrt(d_min / d_max) where d_min
and d_max are the shortest and longest Euclidean distances from the pixel
center to the instance's contour pixel centers. Contour pixels (d_min = 0)
and single-pixel instances (d_max = 0) get 0.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

from .errors import EmptyInstance, ShapeError
from .projection import validate_masks

BCE_EPS = 1e-7
_CHUNK = 4096  # pixels per cdist block, bounds memory on large instances


def contour(mask: np.ndarray) -> np.ndarray:
    """(K, 2) array of (y, x) contour pixels of a binary mask.

    A mask pixel is contour if any 4-neighbor is outside the mask or it lies
    on the image border.
    """
    mask = np.asarray(mask, dtype=bool)
    if not np.any(mask):
        raise EmptyInstance("empty mask")
    interior = np.zeros_like(mask)
    interior[1:-1, 1:-1] = (
        mask[1:-1, 1:-1]
        & mask[:-2, 1:-1]
        & mask[2:, 1:-1]
        & mask[1:-1, :-2]
        & mask[1:-1, 2:]
    )
    ys, xs = np.nonzero(mask & ~interior)
    return np.stack([ys, xs], axis=1)


def centerness_map(masks: np.ndarray, contour_subsample: int = 1) -> np.ndarray:
    """Centerness in [0, 1] per pixel; 0 outside all instances.

    contour_subsample > 1 keeps every k-th contour pixel for d_min/d_max
    (approximation, off by default; error bounded by the contour gap).
    """
    masks = np.asarray(masks)
    n = validate_masks(masks)
    out = np.zeros(masks.shape, dtype=np.float64)
    for i in range(1, n + 1):
        sel = masks == i
        if not np.any(sel):
            continue
        cont = contour(sel)
        if contour_subsample > 1:
            cont = cont[::contour_subsample]
        ys, xs = np.nonzero(sel)
        pix = np.stack([ys, xs], axis=1).astype(np.float64)
        cpts = cont.astype(np.float64)
        vals = np.empty(len(pix))
        for lo in range(0, len(pix), _CHUNK):
            dist = cdist(pix[lo:lo + _CHUNK], cpts)
            dmin = dist.min(axis=1)
            dmax = dist.max(axis=1)
            block = np.zeros(len(dmin))
            ok = dmax > 0
            block[ok] = np.sqrt(dmin[ok] / dmax[ok])
            vals[lo:lo + _CHUNK] = block
        out[sel] = vals
    return out


def fuse(F: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Element-wise F * (1 - C) per channel: emphasizes boundary context."""
    F = np.asarray(F, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    if F.shape[-2:] != C.shape:
        raise ShapeError(f"feature spatial shape {F.shape[-2:]} != centerness {C.shape}")
    return F * (1.0 - C)


def centerness_loss(pred: np.ndarray, gt: np.ndarray) -> float:
    """Mean per-pixel binary cross-entropy between centerness maps."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ShapeError(f"{pred.shape} != {gt.shape}")
    p = np.clip(pred, BCE_EPS, 1.0 - BCE_EPS)
    return float(np.mean(-(gt * np.log(p) + (1.0 - gt) * np.log(1.0 - p))))
