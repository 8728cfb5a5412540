"""Segmentation and depth evaluation metrics, plus table-style reports.

BER conventions: the standard balanced error rate averages the per-class
rates TP/(TP+FN) and TN/(TN+FP); the "as-printed" variant uses TP/(TP+FP)
and TN/(TN+FN). Both are exposed; standard is the default. A rate whose
denominator is 0 counts as 1 (vacuous class).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyEvaluation, ShapeError

SIGMA_THRESHOLDS = (1.25, 1.25**2, 1.25**3)


@dataclass
class SegMetrics:
    iou: float
    f1: float
    mae: float
    ber: float  # reported x100

    def row(self) -> list[float]:
        """Report column order: IoU, F1, MAE, BER."""
        return [self.iou, self.f1, self.mae, self.ber]


@dataclass
class DepthMetrics:
    abs_rel: float
    mae: float
    rmse: float
    sigma1: float
    sigma2: float
    sigma3: float

    def row(self) -> list[float]:
        """Report column order: Abs. Rel., MAE, RMSE, sigma1..3."""
        return [self.abs_rel, self.mae, self.rmse, self.sigma1, self.sigma2, self.sigma3]


def confusion(pred_bin: np.ndarray, gt_bin: np.ndarray) -> tuple[int, int, int, int]:
    """(TP, FP, TN, FN) counts for binary grids."""
    tp = int(np.count_nonzero(pred_bin & gt_bin))
    fp = int(np.count_nonzero(pred_bin & ~gt_bin))
    tn = int(np.count_nonzero(~pred_bin & ~gt_bin))
    fn = int(np.count_nonzero(~pred_bin & gt_bin))
    return tp, fp, tn, fn


def _rate(num: int, den: int) -> float:
    return num / den if den else 1.0


def ber_from_confusion(tp: int, fp: int, tn: int, fn: int,
                       convention: str = "standard") -> float:
    """Balanced error rate x100 under either convention."""
    if convention == "standard":
        r1, r2 = _rate(tp, tp + fn), _rate(tn, tn + fp)
    elif convention == "as-printed":
        r1, r2 = _rate(tp, tp + fp), _rate(tn, tn + fn)
    else:
        raise ValueError(f"unknown BER convention {convention!r}")
    return 100.0 * (1.0 - 0.5 * (r1 + r2))


def seg_metrics(pred: np.ndarray, gt: np.ndarray, threshold: float = 0.5,
                ber_convention: str = "standard") -> SegMetrics:
    """IoU / F1 / MAE / BER for probability predictions vs a binary mask.

    MAE is computed on the raw probabilities; the other metrics binarize
    at `threshold`.
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ShapeError(f"{pred.shape} != {gt.shape}")
    gt_bin = gt.astype(bool)
    pred_bin = pred >= threshold
    tp, fp, tn, fn = confusion(pred_bin, gt_bin)
    iou = _rate(tp, tp + fp + fn) if (tp + fp + fn) else 1.0
    precision = _rate(tp, tp + fp)
    recall = _rate(tp, tp + fn)
    f1 = 2 * precision * recall / (precision + recall) if (precision + recall) else 0.0
    mae = float(np.mean(np.abs(pred - gt_bin.astype(np.float64))))
    ber = ber_from_confusion(tp, fp, tn, fn, ber_convention)
    return SegMetrics(iou=iou, f1=f1, mae=mae, ber=ber)


def depth_metrics(pred: np.ndarray, gt: np.ndarray, valid=None) -> DepthMetrics:
    """AbsRel / MAE / RMSE / sigma_{1..3} over valid pixels (gt>0, pred>0)."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ShapeError(f"{pred.shape} != {gt.shape}")
    mask = (gt > 0) & (pred > 0)
    if valid is not None:
        mask &= np.asarray(valid, dtype=bool)
    if not np.any(mask):
        raise EmptyEvaluation("no valid pixels")
    y = pred[mask]
    y_star = gt[mask]
    err = np.abs(y_star - y)
    ratio = np.maximum(y / y_star, y_star / y)
    sigmas = [float(np.mean(ratio < t)) for t in SIGMA_THRESHOLDS]
    return DepthMetrics(
        abs_rel=float(np.mean(err / y_star)),
        mae=float(np.mean(err)),
        rmse=float(np.sqrt(np.mean((y_star - y) ** 2))),
        sigma1=sigmas[0], sigma2=sigmas[1], sigma3=sigmas[2],
    )


DEPTH_COLUMNS = ["Abs. Rel.", "MAE", "RMSE", "sigma1", "sigma2", "sigma3"]
SEG_COLUMNS = ["IoU", "F1", "MAE", "BER"]


def format_table(columns: list[str], rows: dict[str, list[float]], precision: int = 4) -> str:
    """Aligned-column text table; rows map a label to metric values."""
    label_w = max([len("frame")] + [len(k) for k in rows])
    widths = [max(len(c), precision + 4) for c in columns]
    header = "frame".ljust(label_w) + "  " + "  ".join(
        c.rjust(w) for c, w in zip(columns, widths))
    lines = [header, "-" * len(header)]
    for label, vals in rows.items():
        cells = "  ".join(f"{v:.{precision}f}".rjust(w) for v, w in zip(vals, widths))
        lines.append(label.ljust(label_w) + "  " + cells)
    return "\n".join(lines)


def format_csv(columns: list[str], rows: dict[str, list[float]]) -> str:
    lines = ["frame," + ",".join(columns)]
    for label, vals in rows.items():
        lines.append(label + "," + ",".join(repr(float(v)) for v in vals))
    return "\n".join(lines) + "\n"
