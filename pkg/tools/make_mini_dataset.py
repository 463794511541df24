#!/usr/bin/env python3
"""Build the bundled synthetic mini dataset used by tests and demos.

The dataset follows the standard layout (models/, test/<scene>/scene_gt.json,
scene_camera.json, depth/*.png, test_targets.json) and is rendered entirely
by the engine's own rasterizer, so it substitutes for real captured data in
end-to-end runs. Three submissions are generated alongside it:

* ``perfect.csv``  -- the ground-truth poses themselves (score 1 each).
* ``shifted.csv``  -- every pose translated by 2 * diameter along +x.
* ``mixed.csv``    -- like perfect, but the scene-1/image-0 cube is
  translated by 0.23 * diameter along +x (a hand-derived MSSD error).

Everything is deterministic; re-running reproduces identical bytes.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

REPO_ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO_ROOT / "src"))

from poseval.dataset_io import (  # noqa: E402
    ObjectAnnotation,
    write_depth_image,
    write_models_info,
    write_submission,
)
from poseval.geometry import RigidTransform, rotation_about_axis, save_mesh_ply  # noqa: E402
from poseval.raster import depth_to_distance, render_depth_map  # noqa: E402
from poseval.scoring import PoseEstimate  # noqa: E402
from poseval.shapes import cube, scalene_tetrahedron  # noqa: E402
from poseval.symmetry import find_discrete_symmetries  # noqa: E402
from poseval.visibility import visibility_mask, visible_fraction  # noqa: E402
from poseval.geometry import CameraIntrinsics  # noqa: E402

OUT_DIR = REPO_ROOT / "tests" / "data" / "mini"
DEPTH_SCALE = 0.1
CAM = CameraIntrinsics(fx=120.0, fy=120.0, cx=32.0, cy=32.0, width=64, height=64)
SCENE_ID = 1
CUBE_ID = 1
TETRA_ID = 2


def _rot(axis, degrees):
    return rotation_about_axis(np.asarray(axis, float) / np.linalg.norm(axis),
                               np.deg2rad(degrees))


def build_scene(meshes):
    """(im_id -> list of (obj_id, pose)); poses chosen to keep every
    instance clearly visible with some partial overlap in image 2."""
    poses = {
        0: [
            (CUBE_ID, RigidTransform(_rot((1, 1, 0), 30.0), (0.0, 0.0, 600.0))),
        ],
        1: [
            (CUBE_ID, RigidTransform(_rot((0, 1, 0), -40.0), (-40.0, 0.0, 700.0))),
            (TETRA_ID, RigidTransform(_rot((1, 0, 1), 70.0), (30.0, 10.0, 650.0))),
        ],
        2: [
            (CUBE_ID, RigidTransform(_rot((0, 0, 1), 15.0), (0.0, -30.0, 800.0))),
            (CUBE_ID, RigidTransform(_rot((1, 0, 0), 55.0), (50.0, 20.0, 620.0))),
            (TETRA_ID, RigidTransform(_rot((0, 1, 0), 120.0), (-55.0, -15.0, 580.0))),
        ],
    }
    return poses


def composite_depth(meshes, instances):
    depth = np.zeros((CAM.height, CAM.width))
    for obj_id, pose in instances:
        layer = render_depth_map(meshes[obj_id], pose, CAM)
        fg = layer > 0
        closer = fg & ((depth == 0) | (layer < depth))
        depth[closer] = layer[closer]
    return depth


def main():
    meshes = {CUBE_ID: cube(60.0), TETRA_ID: scalene_tetrahedron(0.4)}
    scene = build_scene(meshes)

    models_dir = OUT_DIR / "models"
    scene_dir = OUT_DIR / "test" / f"{SCENE_ID:06d}"
    depth_dir = scene_dir / "depth"
    for d in (models_dir, depth_dir, OUT_DIR / "submissions"):
        d.mkdir(parents=True, exist_ok=True)

    save_mesh_ply(models_dir / f"obj_{CUBE_ID:06d}.ply", meshes[CUBE_ID])
    save_mesh_ply(models_dir / f"obj_{TETRA_ID:06d}.ply", meshes[TETRA_ID],
                  binary=True)

    cube_syms = find_discrete_symmetries(meshes[CUBE_ID])
    non_identity = [
        t for t in cube_syms.transforms
        if not np.allclose(t.matrix(), np.eye(4), atol=1e-9)
    ]
    assert len(non_identity) == 23, f"cube search found {len(cube_syms)}"
    write_models_info(
        models_dir / "models_info.json",
        {
            CUBE_ID: ObjectAnnotation(
                diameter=meshes[CUBE_ID].diameter,
                symmetries_discrete=non_identity,
            ),
            TETRA_ID: ObjectAnnotation(diameter=meshes[TETRA_ID].diameter),
        },
    )

    scene_gt = {}
    scene_camera = {}
    targets = []
    for im_id, instances in scene.items():
        depth = composite_depth(meshes, instances)
        write_depth_image(depth_dir / f"{im_id:06d}.png", depth, DEPTH_SCALE)
        measured = depth_to_distance(
            np.round(depth / DEPTH_SCALE) * DEPTH_SCALE, CAM
        )
        counts = {}
        for obj_id, pose in instances:
            from poseval.raster import render_distance_map

            dist = render_distance_map(meshes[obj_id], pose, CAM)
            frac = visible_fraction(visibility_mask(dist, measured), dist)
            assert frac >= 0.15, (
                f"image {im_id} object {obj_id} only {frac:.0%} visible; "
                "adjust the scene poses"
            )
            counts[obj_id] = counts.get(obj_id, 0) + 1
            print(f"im {im_id} obj {obj_id}: visible fraction {frac:.2f}")
        scene_gt[str(im_id)] = [
            {
                "obj_id": obj_id,
                "cam_R_m2c": [float(v) for v in pose.rotation.ravel()],
                "cam_t_m2c": [float(v) for v in pose.translation],
            }
            for obj_id, pose in instances
        ]
        scene_camera[str(im_id)] = {
            "cam_K": [CAM.fx, 0.0, CAM.cx, 0.0, CAM.fy, CAM.cy, 0.0, 0.0, 1.0],
            "depth_scale": DEPTH_SCALE,
        }
        for obj_id, count in sorted(counts.items()):
            targets.append(
                {"scene_id": SCENE_ID, "im_id": im_id, "obj_id": obj_id,
                 "inst_count": count}
            )

    for name, payload in (
        ("scene_gt.json", scene_gt),
        ("scene_camera.json", scene_camera),
    ):
        with open(scene_dir / name, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    with open(OUT_DIR / "test_targets.json", "w", encoding="utf-8") as fh:
        json.dump(targets, fh, indent=2)
        fh.write("\n")
    with open(OUT_DIR / "test_targets_im0.json", "w", encoding="utf-8") as fh:
        json.dump([targets[0]], fh, indent=2)
        fh.write("\n")

    def estimates(perturb):
        rows = []
        for im_id, instances in scene.items():
            for k, (obj_id, pose) in enumerate(instances):
                rows.append(
                    PoseEstimate(
                        scene_id=SCENE_ID,
                        im_id=im_id,
                        obj_id=obj_id,
                        pose=perturb(im_id, k, obj_id, pose),
                        score=1.0,
                        time=0.5,
                    )
                )
        return rows

    def keep(_im, _k, _obj, pose):
        return pose

    def shift_2d(_im, _k, obj_id, pose):
        offset = 2.0 * meshes[obj_id].diameter
        return RigidTransform(pose.rotation, pose.translation + [offset, 0, 0])

    def mixed(im_id, k, obj_id, pose):
        if im_id == 0 and k == 0:
            offset = 0.23 * meshes[obj_id].diameter
            return RigidTransform(
                pose.rotation, pose.translation + [offset, 0, 0]
            )
        return pose

    sub_dir = OUT_DIR / "submissions"
    write_submission(sub_dir / "perfect.csv", estimates(keep))
    write_submission(sub_dir / "shifted.csv", estimates(shift_2d))
    write_submission(sub_dir / "mixed.csv", estimates(mixed))
    print(f"mini dataset written to {OUT_DIR}")


if __name__ == "__main__":
    main()
