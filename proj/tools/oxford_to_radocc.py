#!/usr/bin/env python3
"""Convert Oxford Radar RobotCar sequences into the radocc dataset layout.

Input, per sequence directory:
    radar/<ts>.png               polar scans, 11 metadata columns then power
    velodyne_left/<ts>.bin       float32 planar (x[N], y[N], z[N], intensity[N])
    gt/radar_odometry.csv        relative radar poses between consecutive scans

Output, under --out:
    <name>/radar/<ts>.png        copied unchanged
    <name>/lidar/<ts>.bin        float32 interleaved x, y, z, intensity in the radar frame
    <name>/poses.csv             timestamp,x,y,yaw of the radar at each scan
    manifest.json

Radar PNGs stay at the native range resolution; set prepare.range_resolution
(e.g. 0.175) to resample them when preparing ground truth.
"""

import argparse
import csv
import json
import math
import shutil
import struct
import sys
from pathlib import Path

import numpy as np

METADATA_COLUMNS = 11


def png_size(path):
    with open(path, "rb") as f:
        head = f.read(24)
    if head[:8] != b"\x89PNG\r\n\x1a\n" or head[12:16] != b"IHDR":
        raise ValueError(f"{path}: not a PNG file")
    width, height = struct.unpack(">II", head[16:24])
    return width, height


def se3(xyzrpy):
    x, y, z, roll, pitch, yaw = xyzrpy
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
    ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
    rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
    t = np.eye(4)
    t[:3, :3] = rz @ ry @ rx
    t[:3, 3] = (x, y, z)
    return t


def read_extrinsics(path):
    values = [float(v) for v in Path(path).read_text().split()]
    if len(values) != 6:
        raise ValueError(f"{path}: expected 'x y z roll pitch yaw'")
    return se3(values)


def radar_from_lidar(extrinsics_dir, lidar):
    # Extrinsics give each sensor's pose in the shared vehicle frame.
    radar = read_extrinsics(Path(extrinsics_dir) / "radar.txt")
    laser = read_extrinsics(Path(extrinsics_dir) / f"{lidar}.txt")
    return np.linalg.solve(radar, laser)


def compose(a, b):
    x, y, yaw = a
    bx, by, byaw = b
    return (x + math.cos(yaw) * bx - math.sin(yaw) * by, y + math.sin(yaw) * bx + math.cos(yaw) * by,
            math.atan2(math.sin(yaw + byaw), math.cos(yaw + byaw)))


def inverse(a):
    x, y, yaw = a
    c, s = math.cos(yaw), math.sin(yaw)
    return (-c * x - s * y, s * x - c * y, -yaw)


def integrate_odometry(path):
    """Absolute planar radar poses keyed by radar timestamp.

    Each row's (x, y, yaw) is the source scan's pose in the destination scan's
    frame. The first row's destination is the origin.
    """
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    if not rows:
        raise ValueError(f"{path}: no odometry rows")
    poses = {}
    for row in rows:
        src, dst = int(row["source_radar_timestamp"]), int(row["destination_radar_timestamp"])
        rel = (float(row["x"]), float(row["y"]), float(row["yaw"]))
        if not poses:
            poses[dst] = (0.0, 0.0, 0.0)
        if dst in poses:
            poses[src] = compose(poses[dst], rel)
        elif src in poses:
            poses[dst] = compose(poses[src], inverse(rel))
        else:
            raise ValueError(f"{path}: row {src} -> {dst} is not connected to earlier rows")
    return [(t, *poses[t]) for t in sorted(poses)]


def convert_scan(src, dst, transform):
    data = np.fromfile(src, dtype="<f4")
    if data.size % 4:
        raise ValueError(f"{src}: size is not a multiple of four floats")
    pts = data.reshape(4, -1)
    xyz1 = np.vstack([pts[:3].astype(np.float64), np.ones(pts.shape[1])])
    xyz = (transform @ xyz1)[:3]
    out = np.vstack([xyz, pts[3]]).T.astype("<f4")
    out.tofile(dst)


def convert_sequence(seq_dir, out_dir, transform, lidar):
    seq_dir, out_dir = Path(seq_dir), Path(out_dir)
    radar_files = sorted(seq_dir.glob("radar/*.png"), key=lambda p: int(p.stem))
    if not radar_files:
        raise ValueError(f"{seq_dir}: no radar/*.png")
    poses = integrate_odometry(seq_dir / "gt" / "radar_odometry.csv")
    t0, t1 = poses[0][0], poses[-1][0]

    shape = None
    (out_dir / "radar").mkdir(parents=True, exist_ok=True)
    (out_dir / "lidar").mkdir(parents=True, exist_ok=True)
    n_radar = 0
    for f in radar_files:
        if not t0 <= int(f.stem) <= t1:
            continue
        size = png_size(f)
        if shape is None:
            shape = size
        elif size != shape:
            raise ValueError(f"{f}: {size[1]} x {size[0]} differs from {shape[1]} x {shape[0]}")
        shutil.copyfile(f, out_dir / "radar" / f.name)
        n_radar += 1
    if n_radar == 0:
        raise ValueError(f"{seq_dir}: no radar scan inside the odometry time range")

    n_lidar = 0
    for f in sorted(seq_dir.glob(f"{lidar}/*.bin"), key=lambda p: int(p.stem)):
        if t0 <= int(f.stem) <= t1:
            convert_scan(f, out_dir / "lidar" / f.name, transform)
            n_lidar += 1

    with open(out_dir / "poses.csv", "w") as f:
        f.write("timestamp,x,y,yaw\n")
        for t, x, y, yaw in poses:
            f.write(f"{t},{x:.17g},{y:.17g},{yaw:.17g}\n")
    return shape, n_radar, n_lidar


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("sequences", nargs="+", help="Oxford sequence directories")
    ap.add_argument("--out", required=True, help="dataset directory to create")
    ap.add_argument("--extrinsics", required=True, help="directory with radar.txt and <lidar>.txt")
    ap.add_argument("--lidar", default="velodyne_left", choices=["velodyne_left", "velodyne_right"])
    ap.add_argument("--range-resolution", type=float, default=0.0432, help="native radar m/bin")
    args = ap.parse_args(argv)

    out = Path(args.out)
    transform = radar_from_lidar(args.extrinsics, args.lidar)
    entries, shape = [], None
    for i, seq in enumerate(args.sequences):
        name = f"seq_{i:03d}"
        s, n_radar, n_lidar = convert_sequence(seq, out / name, transform, args.lidar)
        if shape is not None and s != shape:
            print(f"error: {seq} has a different radar shape", file=sys.stderr)
            return 1
        shape = s
        entries.append({"name": name, "source": str(Path(seq).resolve()), "radar_frames": n_radar,
                        "lidar_scans": n_lidar})
        print(f"{name}: {n_radar} radar, {n_lidar} lidar from {seq}")

    width, height = shape
    manifest = {
        "format": "radocc-dataset",
        "source": "oxford-radar-robotcar",
        "n_azimuth": height,
        "n_range": width - METADATA_COLUMNS,
        "range_resolution": args.range_resolution,
        "radar_frames": sum(e["radar_frames"] for e in entries),
        "lidar_scans": sum(e["lidar_scans"] for e in entries),
        "sequences": entries,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
