"""Batch dataset operations behind the CLI: annotate, stats, eval, synth.

All operations are deterministic: frames are independent work units, results
are merged in frame-id order regardless of the parallelism degree.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import losses as losses_mod
from . import metrics as metrics_mod
from .errors import EmptyDataset, GlassKitError, ShapeError
from .manifest import FrameEntry, InstanceEntry, SceneManifest, load_manifest, save_manifest
from .pfm import read_mask_png, read_pfm, write_mask_png, write_pfm
from .plane import fit_plane_lsq, to_polar, transform_points
from .projection import render_depth
from .synth import SceneSpec, SyntheticScene, generate_scene


@dataclass
class Diagnostic:
    frame: str
    instance: int | None
    error: str
    message: str

    def as_dict(self) -> dict:
        return {"frame": self.frame, "instance": self.instance,
                "error": self.error, "message": self.message}


@dataclass
class AnnotateResult:
    manifest_path: Path
    log_path: Path
    diagnostics: list[Diagnostic]


def _annotate_frame(args):
    """Worker: transform -> fit -> render for one frame. Returns
    (frame_id, depth array or None, planes by id, residuals, diagnostics)."""
    frame, intr, mask_path = args
    diagnostics = []
    masks = read_mask_png(mask_path)
    if masks.shape != (intr.height, intr.width):
        raise ShapeError(f"frame {frame.id}: mask shape {masks.shape} vs "
                         f"intrinsics {(intr.height, intr.width)}")
    labels = set(np.unique(masks).tolist()) - {0}
    ids = {inst.id for inst in frame.instances}
    if labels - ids:
        diagnostics.append(Diagnostic(frame.id, None, "LabelMismatch",
                                      f"mask labels {sorted(labels - ids)} not in manifest"))
    planes, residuals = {}, {}
    for inst in frame.instances:
        try:
            p_cam = transform_points(frame.pose, inst.box_vertices)
            plane = fit_plane_lsq(p_cam)
            rms = float(np.sqrt(np.mean(plane.signed_distance(p_cam) ** 2)))
            planes[inst.id] = plane
            residuals[inst.id] = rms
        except (GlassKitError, ValueError) as exc:
            diagnostics.append(Diagnostic(frame.id, inst.id, type(exc).__name__, str(exc)))

    depth = np.zeros((intr.height, intr.width), dtype=np.float64)
    for inst_id, plane in sorted(planes.items()):
        sel = (masks == inst_id).astype(np.int32)
        if not sel.any():
            continue
        try:
            depth += render_depth(sel, [plane], intr)
        except GlassKitError as exc:
            diagnostics.append(Diagnostic(frame.id, inst_id, type(exc).__name__, str(exc)))
    return frame.id, depth, planes, residuals, diagnostics


def annotate(manifest: SceneManifest, out_dir, parallel: int = 1) -> AnnotateResult:
    """Run the annotation math (transform, fit, project) over a manifest.

    Writes depth PFMs, an annotated manifest with resolved planes, and a
    JSON log of per-instance fit residuals and diagnostics.
    """
    out_dir = Path(out_dir)
    (out_dir / "depth").mkdir(parents=True, exist_ok=True)
    jobs = [(fr, manifest.intrinsics, manifest.resolve(fr.mask)) for fr in manifest.frames]
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(_annotate_frame, jobs))
    else:
        results = [_annotate_frame(j) for j in jobs]

    diagnostics: list[Diagnostic] = []
    log_frames = []
    out_frames = []
    for frame, (fid, depth, planes, residuals, diags) in zip(manifest.frames, results):
        diagnostics.extend(diags)
        depth_rel = f"depth/{fid}.pfm"
        write_pfm(out_dir / depth_rel, depth)
        instances = [
            InstanceEntry(id=inst.id, box_vertices=inst.box_vertices,
                          plane=planes.get(inst.id))
            for inst in frame.instances
        ]
        out_frames.append(FrameEntry(id=fid, pose=frame.pose, mask=frame.mask,
                                     instances=instances, depth=depth_rel,
                                     centerness=frame.centerness))
        log_frames.append({
            "frame": fid,
            "fit_residuals": {str(k): residuals[k] for k in sorted(residuals)},
        })

    # annotated manifest references source masks/centerness; keep them reachable
    _relink_inputs(manifest, out_frames, out_dir)
    out_manifest = SceneManifest(intrinsics=manifest.intrinsics,
                                 frames=out_frames, root=out_dir)
    manifest_path = out_dir / "manifest.yaml"
    save_manifest(out_manifest, manifest_path)
    log_path = out_dir / "fit_log.json"
    log = {"frames": log_frames,
           "diagnostics": [d.as_dict() for d in diagnostics]}
    log_path.write_text(json.dumps(log, indent=2, sort_keys=True) + "\n")
    return AnnotateResult(manifest_path, log_path, diagnostics)


def _relink_inputs(src: SceneManifest, out_frames: list[FrameEntry], out_dir: Path) -> None:
    """Copy masks (and centerness maps) into the output tree so the output
    manifest is self-contained."""
    (out_dir / "masks").mkdir(exist_ok=True)
    for fr in out_frames:
        data = (src.root / fr.mask).read_bytes()
        rel = f"masks/{fr.id}.png"
        (out_dir / rel).write_bytes(data)
        fr.mask = rel
        if fr.centerness is not None:
            (out_dir / "centerness").mkdir(exist_ok=True)
            data = (src.root / fr.centerness).read_bytes()
            rel = f"centerness/{fr.id}.pfm"
            (out_dir / rel).write_bytes(data)
            fr.centerness = rel


@dataclass
class DatasetStats:
    frame_count: int
    planes_per_image: dict[str, int]        # bins "1".."10", "10+"
    depth_range_hist: dict[str, int]        # 2 m bins over [0, 18)
    per_frame_planes: dict[str, int] = field(default_factory=dict)
    per_frame_depth_range: dict[str, float] = field(default_factory=dict)

    def text(self) -> str:
        lines = [f"frames: {self.frame_count}", "", "planes per image:"]
        lines += _bar_lines(self.planes_per_image)
        lines += ["", "glass depth range per image (m):"]
        lines += _bar_lines(self.depth_range_hist)
        return "\n".join(lines)

    def csv(self) -> str:
        lines = ["histogram,bin,count"]
        for b, c in self.planes_per_image.items():
            lines.append(f"planes_per_image,{b},{c}")
        for b, c in self.depth_range_hist.items():
            lines.append(f"depth_range,{b},{c}")
        return "\n".join(lines) + "\n"


def _bar_lines(hist: dict[str, int]) -> list[str]:
    peak = max(hist.values()) if hist else 0
    width = max(len(b) for b in hist)
    out = []
    for b, c in hist.items():
        bar = "#" * (0 if peak == 0 else round(40 * c / peak))
        out.append(f"  {b.rjust(width)} {str(c).rjust(6)} {bar}")
    return out


def stats(manifest: SceneManifest) -> DatasetStats:
    """Planes-per-image and per-image glass-depth-range histograms."""
    if not manifest.frames:
        raise EmptyDataset("manifest has no frames")
    plane_bins = {str(i): 0 for i in range(0, 11)}
    plane_bins["10+"] = 0
    edges = np.arange(0.0, 20.0, 2.0)
    range_bins = {f"[{edges[i]:.0f},{edges[i + 1]:.0f})": 0 for i in range(len(edges) - 1)}
    per_planes, per_range = {}, {}
    for fr in manifest.frames:
        n = len(fr.instances)
        per_planes[fr.id] = n
        key = str(n) if 0 <= n <= 10 else "10+"
        plane_bins[key] += 1
        depth = _frame_depth(manifest, fr)
        nz = depth[depth > 0]
        rng = float(nz.max() - nz.min()) if nz.size else 0.0
        per_range[fr.id] = rng
        idx = min(int(rng // 2.0), len(edges) - 2)
        range_bins[f"[{edges[idx]:.0f},{edges[idx + 1]:.0f})"] += 1
    return DatasetStats(frame_count=len(manifest.frames),
                        planes_per_image=plane_bins,
                        depth_range_hist=range_bins,
                        per_frame_planes=per_planes,
                        per_frame_depth_range=per_range)


def _frame_depth(manifest: SceneManifest, fr: FrameEntry) -> np.ndarray:
    if fr.depth is not None:
        return read_pfm(manifest.resolve(fr.depth)).astype(np.float64)
    if all(inst.plane is not None for inst in fr.instances):
        masks = read_mask_png(manifest.resolve(fr.mask))
        return render_depth(masks, [i.plane for i in sorted(fr.instances, key=lambda x: x.id)],
                            manifest.intrinsics)
    raise EmptyDataset(f"frame {fr.id}: no depth map and no resolved planes")


@dataclass
class EvalReport:
    columns: list[str]
    rows: dict[str, list[float]]

    def text(self) -> str:
        return metrics_mod.format_table(self.columns, self.rows)

    def csv(self) -> str:
        return metrics_mod.format_csv(self.columns, self.rows)


def _mean_row(rows: dict[str, list[float]]) -> list[float]:
    return list(np.mean(np.array(list(rows.values())), axis=0))


def eval_seg(pred_dir, gt: SceneManifest, threshold: float = 0.5,
             ber_convention: str = "standard") -> EvalReport:
    """Per-frame segmentation metrics; predictions are <frame>.pfm probability maps."""
    pred_dir = Path(pred_dir)
    rows = {}
    for fr in gt.frames:
        pred = read_pfm(_pred_file(pred_dir, fr.id)).astype(np.float64)
        gt_mask = read_mask_png(gt.resolve(fr.mask)) > 0
        m = metrics_mod.seg_metrics(pred, gt_mask, threshold, ber_convention)
        rows[fr.id] = m.row()
    _require_rows(rows)
    rows["mean"] = _mean_row(rows)
    return EvalReport(metrics_mod.SEG_COLUMNS, rows)


def eval_depth(pred_dir, gt: SceneManifest) -> EvalReport:
    """Per-frame depth metrics restricted to glass pixels."""
    pred_dir = Path(pred_dir)
    rows = {}
    for fr in gt.frames:
        pred = read_pfm(_pred_file(pred_dir, fr.id)).astype(np.float64)
        gt_depth = _frame_depth(gt, fr)
        glass = read_mask_png(gt.resolve(fr.mask)) > 0
        m = metrics_mod.depth_metrics(pred, gt_depth, valid=glass)
        rows[fr.id] = m.row()
    _require_rows(rows)
    rows["mean"] = _mean_row(rows)
    return EvalReport(metrics_mod.DEPTH_COLUMNS, rows)


LOSS_COLUMNS = ["L_p", "L_s", "L_c", "total"]


def eval_losses(pred_dir, gt: SceneManifest, delta: float = losses_mod.DEFAULT_DELTA) -> EvalReport:
    """Loss stack per frame.

    Expects <frame>.planes.pfm (3-channel polar params) and optionally
    <frame>.seg.pfm / <frame>.centerness.pfm next to it. Missing seg or
    centerness predictions contribute 0.
    """
    pred_dir = Path(pred_dir)
    rows = {}
    for fr in gt.frames:
        masks = read_mask_png(gt.resolve(fr.mask))
        inst_sorted = sorted(fr.instances, key=lambda x: x.id)
        if any(inst.plane is None for inst in inst_sorted):
            raise EmptyDataset(f"frame {fr.id}: ground truth has unresolved planes")
        params = read_pfm(pred_dir / f"{fr.id}.planes.pfm").astype(np.float64)
        params = np.moveaxis(params, -1, 0)
        gt_params = []
        for inst in inst_sorted:
            t1, t2 = to_polar(inst.plane.n)
            gt_params.append((t1, t2, inst.plane.d))
        _, report = losses_mod.plane_loss_map(params, gt_params, masks,
                                              gt.intrinsics, delta)
        l_p = report.aggregate
        seg_file = pred_dir / f"{fr.id}.seg.pfm"
        l_s = (losses_mod.seg_loss(read_pfm(seg_file).astype(np.float64),
                                   (masks > 0).astype(np.float64))
               if seg_file.exists() else 0.0)
        cent_file = pred_dir / f"{fr.id}.centerness.pfm"
        l_c = 0.0
        if cent_file.exists() and fr.centerness is not None:
            from .centerness import centerness_loss
            l_c = centerness_loss(read_pfm(cent_file).astype(np.float64),
                                  read_pfm(gt.resolve(fr.centerness)).astype(np.float64))
        rows[fr.id] = [l_p, l_s, l_c, losses_mod.total_loss(l_c, l_s, l_p)]
    _require_rows(rows)
    rows["mean"] = _mean_row(rows)
    return EvalReport(LOSS_COLUMNS, rows)


def _pred_file(pred_dir: Path, frame_id: str) -> Path:
    p = pred_dir / f"{frame_id}.pfm"
    if not p.exists():
        raise FileNotFoundError(f"missing prediction {p}")
    return p


def _require_rows(rows: dict) -> None:
    if not rows:
        raise EmptyDataset("no frames evaluated")


def _synth_one(args):
    seed, category, plane_count, depth_range, intrinsics = args
    spec = SceneSpec(seed=seed, category=category, plane_count=plane_count,
                     depth_range=depth_range, intrinsics=intrinsics)
    return generate_scene(spec)


def write_synth_dataset(out_dir, seed: int, count: int, category: str,
                        plane_count: int, depth_range=None, intrinsics=None,
                        parallel: int = 1) -> Path:
    """Generate `count` scenes (seeds seed..seed+count-1) as a dataset tree.

    Layout: manifest.yaml + masks/*.png + depth/*.pfm + centerness/*.pfm.
    Byte-identical for identical arguments, regardless of `parallel`.
    """
    from .synth import DEFAULT_DEPTH_RANGE, DEFAULT_INTRINSICS

    depth_range = depth_range or DEFAULT_DEPTH_RANGE
    intrinsics = intrinsics or DEFAULT_INTRINSICS
    out_dir = Path(out_dir)
    for sub in ("masks", "depth", "centerness"):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)
    jobs = [(seed + i, category, plane_count, depth_range, intrinsics)
            for i in range(count)]
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            scenes = list(pool.map(_synth_one, jobs))
    else:
        scenes = [_synth_one(j) for j in jobs]

    frames = []
    for i, scene in enumerate(scenes):
        fid = f"frame_{i:05d}"
        write_mask_png(out_dir / "masks" / f"{fid}.png", scene.masks)
        write_pfm(out_dir / "depth" / f"{fid}.pfm", scene.depth)
        write_pfm(out_dir / "centerness" / f"{fid}.pfm", scene.centerness)
        instances = [InstanceEntry(id=j + 1, box_vertices=inst.corners_world,
                                   plane=inst.plane)
                     for j, inst in enumerate(scene.instances)]
        frames.append(FrameEntry(id=fid, pose=scene.pose, mask=f"masks/{fid}.png",
                                 instances=instances, depth=f"depth/{fid}.pfm",
                                 centerness=f"centerness/{fid}.pfm"))
    manifest = SceneManifest(intrinsics=intrinsics, frames=frames, root=out_dir)
    save_manifest(manifest, out_dir / "manifest.yaml")
    return out_dir / "manifest.yaml"
