"""Scene manifest: the on-disk schema tying frames, poses, intrinsics,
glass instances, planes and map files together.

A manifest is one YAML file (version field + key/value and arrays); file
paths are relative to the manifest's directory. Floats round-trip exactly
(PyYAML serializes via repr). Schema, version 1:

    version: 1
    intrinsics: {fx, fy, cx, cy, width, height}
    frames:
      - id: frame_00000
        pose:
          rotation: [[r00, r01, r02], [...], [...]]   # world -> camera
          translation: [tx, ty, tz]
        mask: masks/frame_00000.png        # uint8 PNG, pixel = instance id
        depth: depth/frame_00000.pfm       # optional, Pf float map
        centerness: centerness/frame_00000.pfm  # optional
        instances:
          - id: 1
            box_vertices: [[x, y, z], ...]  # world frame, >= 3 points
            plane:                          # optional resolved plane
              theta1: ...                   # radians
              theta2: ...
              d: ...                        # meters
              normal: [nx, ny, nz]          # canonical mirror of the polar triple
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .plane import Plane, RigidTransform, to_polar
from .projection import CameraIntrinsics

MANIFEST_VERSION = 1


@dataclass
class InstanceEntry:
    id: int
    box_vertices: np.ndarray          # (N, 3) world frame
    plane: Plane | None = None        # resolved, camera frame


@dataclass
class FrameEntry:
    id: str
    pose: RigidTransform
    mask: str                         # path relative to the manifest
    instances: list[InstanceEntry]
    depth: str | None = None
    centerness: str | None = None


@dataclass
class SceneManifest:
    intrinsics: CameraIntrinsics
    frames: list[FrameEntry]
    root: Path = field(default_factory=Path)  # directory paths resolve against

    def resolve(self, rel: str) -> Path:
        return self.root / rel


def _plane_block(plane: Plane) -> dict:
    t1, t2 = to_polar(plane.n)
    return {
        "theta1": float(t1),
        "theta2": float(t2),
        "d": float(plane.d),
        "normal": [float(v) for v in plane.n],
    }


def save_manifest(manifest: SceneManifest, path) -> None:
    path = Path(path)
    doc = {
        "version": MANIFEST_VERSION,
        "intrinsics": {
            "fx": manifest.intrinsics.fx, "fy": manifest.intrinsics.fy,
            "cx": manifest.intrinsics.cx, "cy": manifest.intrinsics.cy,
            "width": manifest.intrinsics.width, "height": manifest.intrinsics.height,
        },
        "frames": [],
    }
    for fr in manifest.frames:
        entry = {
            "id": fr.id,
            "pose": {
                "rotation": [[float(v) for v in row] for row in fr.pose.rotation],
                "translation": [float(v) for v in fr.pose.translation],
            },
            "mask": fr.mask,
            "instances": [
                {
                    "id": inst.id,
                    "box_vertices": [[float(v) for v in p] for p in inst.box_vertices],
                    **({"plane": _plane_block(inst.plane)} if inst.plane is not None else {}),
                }
                for inst in fr.instances
            ],
        }
        if fr.depth is not None:
            entry["depth"] = fr.depth
        if fr.centerness is not None:
            entry["centerness"] = fr.centerness
        doc["frames"].append(entry)
    with open(path, "w") as f:
        yaml.safe_dump(doc, f, sort_keys=False)


def load_manifest(path, check_files: bool = True) -> SceneManifest:
    path = Path(path)
    with open(path) as f:
        doc = yaml.safe_load(f)
    version = doc.get("version")
    if version != MANIFEST_VERSION:
        raise ValueError(f"unsupported manifest version {version!r}")
    ki = doc["intrinsics"]
    intr = CameraIntrinsics(fx=float(ki["fx"]), fy=float(ki["fy"]),
                            cx=float(ki["cx"]), cy=float(ki["cy"]),
                            width=int(ki["width"]), height=int(ki["height"]))
    root = path.parent
    frames = []
    for fr in doc.get("frames", []):
        pose = RigidTransform(np.array(fr["pose"]["rotation"], dtype=np.float64),
                              np.array(fr["pose"]["translation"], dtype=np.float64))
        instances = []
        for inst in fr.get("instances", []):
            plane = None
            if "plane" in inst:
                pb = inst["plane"]
                plane = Plane(np.array(pb["normal"], dtype=np.float64), float(pb["d"]))
            instances.append(InstanceEntry(
                id=int(inst["id"]),
                box_vertices=np.array(inst["box_vertices"], dtype=np.float64),
                plane=plane))
        entry = FrameEntry(id=str(fr["id"]), pose=pose, mask=fr["mask"],
                           instances=instances,
                           depth=fr.get("depth"), centerness=fr.get("centerness"))
        if check_files:
            for rel in filter(None, [entry.mask, entry.depth, entry.centerness]):
                if not (root / rel).exists():
                    raise FileNotFoundError(f"frame {entry.id}: missing file {rel}")
        frames.append(entry)
    return SceneManifest(intrinsics=intr, frames=frames, root=root)
