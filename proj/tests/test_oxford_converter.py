#!/usr/bin/env python3
"""Converts a fabricated Oxford-layout sequence and prepares it with the CLI."""

import json
import math
import struct
import subprocess
import sys
import tempfile
import zlib
from pathlib import Path

import numpy as np

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE.parent / "tools"))
import oxford_to_radocc as conv  # noqa: E402

T0 = 1_547_131_046_000_000
N_AZ, N_RANGE = 400, 400


def write_png(path, rows):
    h, w = rows.shape
    raw = b"".join(b"\x00" + rows[r].tobytes() for r in range(h))

    def chunk(tag, data):
        return struct.pack(">I", len(data)) + tag + data + struct.pack(">I", zlib.crc32(tag + data) & 0xFFFFFFFF)

    png = b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", struct.pack(">IIBBBBB", w, h, 8, 0, 0, 0, 0))
    png += chunk(b"IDAT", zlib.compress(raw)) + chunk(b"IEND", b"")
    path.write_bytes(png)


def fabricate(root):
    seq = root / "2019-01-10-11-46-21"
    (seq / "radar").mkdir(parents=True)
    (seq / "velodyne_left").mkdir()
    (seq / "gt").mkdir()
    ext = root / "extrinsics"
    ext.mkdir()
    (ext / "radar.txt").write_text("0 0 0 0 0 0\n")
    (ext / "velodyne_left.txt").write_text("0.5 0 0.3 0 0 0\n")

    radar_ts = [T0 + k * 250_000 for k in range(4)]
    for t in radar_ts:
        img = np.zeros((N_AZ, conv.METADATA_COLUMNS + N_RANGE), dtype=np.uint8)
        img[:, conv.METADATA_COLUMNS + 127] = 200  # wall at 5.5 m on every azimuth
        write_png(seq / "radar" / f"{t}.png", img)
    with open(seq / "gt" / "radar_odometry.csv", "w") as f:
        f.write("source_timestamp,destination_timestamp,x,y,z,roll,pitch,yaw,"
                "source_radar_timestamp,destination_radar_timestamp\n")
        for a, b in zip(radar_ts[1:], radar_ts[:-1]):
            f.write(f"{a},{b},0,0,0,0,0,0,{a},{b}\n")

    ang = np.linspace(0, 2 * math.pi, 720, endpoint=False)
    # A 5.5 m circle around the radar, expressed in the lidar frame.
    wall = np.vstack([5.5 * np.cos(ang) - 0.5, 5.5 * np.sin(ang), -0.3 * np.ones_like(ang), np.ones_like(ang)])
    ground = np.vstack([3.0 * np.cos(ang), 3.0 * np.sin(ang), -2.0 * np.ones_like(ang), np.ones_like(ang)])
    planar = np.hstack([wall, ground]).astype("<f4")
    for k in range(16):
        planar.tofile(seq / "velodyne_left" / f"{T0 - 100_000 + k * 50_000}.bin")
    return seq, ext


def main():
    cli = sys.argv[1]
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        seq, ext = fabricate(root)
        dataset = root / "run" / "dataset"
        assert conv.main([str(seq), "--out", str(dataset), "--extrinsics", str(ext)]) == 0

        m = json.loads((dataset / "manifest.json").read_text())
        assert (m["n_azimuth"], m["n_range"]) == (N_AZ, N_RANGE), m
        out = dataset / "seq_000"
        assert len(list((out / "radar").glob("*.png"))) == 4
        scans = sorted((out / "lidar").glob("*.bin"))
        # Scans before the first or after the last radar pose are dropped.
        assert len(scans) == 14, len(scans)
        pts = np.fromfile(scans[0], dtype="<f4").reshape(-1, 4)
        assert np.allclose(pts[0, :3], [5.5, 0.0, 0.0], atol=1e-5), pts[0]
        assert np.allclose(pts[0, 3], 1.0)

        run = subprocess.run([cli, "prepare", "-q", "--root", str(root / "run"),
                              "--set", "prepare.range_resolution=0.175", "--set", "prepare.test_sequences=0"])
        assert run.returncode == 0, run.returncode
        pm = json.loads((root / "run" / "prepared" / "manifest.json").read_text())
        meta = pm["meta"] if "meta" in pm else pm
        assert meta["n_range"] == math.floor(N_RANGE * 0.0432 / 0.175 + 1e-9), meta
        assert abs(meta["range_resolution"] - 0.175) < 1e-12
        stats = (root / "run" / "prepared" / "stats.csv").read_text().splitlines()
        total = stats[-1].split(",")
        # Wall cells survive the visibility filter; ground points are gone.
        assert int(total[3]) > 0 and int(total[4]) == int(total[3]), total

        run = subprocess.run([cli, "prepare", "-q", "--root", str(root / "run"),
                              "--set", "prepare.range_resolution=0.01"], stderr=subprocess.DEVNULL)
        assert run.returncode == 2, run.returncode
    print("oxford converter: ok")


if __name__ == "__main__":
    main()
