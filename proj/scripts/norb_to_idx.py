#!/usr/bin/env python3
"""Convert the small NORB distribution files to IDX.

Reads smallnorb-5x46789x9x18x6x2x96x96-{training,testing}-{dat,cat,info}.mat
(optionally .gz) and writes <out>/{train,test}-{images,labels}.idx. Images
keep both stereo views as 2 channels (rank-4 IDX, u8).

--lighting selects a subset of the 6 lighting conditions, e.g. the standard
split "0,1", bright "3,5" or dark "2,4"; apply it per split with
--train-lighting / --test-lighting.
"""

import argparse
import gzip
import struct
from pathlib import Path

import numpy as np

BYTE_MAGIC = 0x1E3D4C55
INT_MAGIC = 0x1E3D4C54
PREFIX = "smallnorb-5x46789x9x18x6x2x96x96"


def open_any(path):
    if path.exists():
        return open(path, "rb")
    gz = path.with_name(path.name + ".gz")
    if gz.exists():
        return gzip.open(gz, "rb")
    raise SystemExit(f"missing {path} (or {gz.name})")


def read_norb(path):
    with open_any(path) as f:
        magic, ndim = struct.unpack("<ii", f.read(8))
        dims = struct.unpack("<" + "i" * max(3, ndim), f.read(4 * max(3, ndim)))[:ndim]
        dtype = {BYTE_MAGIC: np.uint8, INT_MAGIC: np.int32}.get(magic & 0xFFFFFFFF)
        if dtype is None:
            raise SystemExit(f"{path}: unknown magic {magic:#x}")
        data = np.frombuffer(f.read(), dtype=np.dtype(dtype).newbyteorder("<"))
    return data.reshape(dims)


def write_idx(images, labels, stem):
    with open(f"{stem}-images.idx", "wb") as f:
        f.write(struct.pack(">I", 0x804))
        f.write(struct.pack(">IIII", *images.shape))
        f.write(np.ascontiguousarray(images, dtype=np.uint8).tobytes())
    with open(f"{stem}-labels.idx", "wb") as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(np.asarray(labels, dtype=np.uint8).tobytes())


def convert(src, split, out_stem, lighting):
    images = read_norb(src / f"{PREFIX}-{split}-dat.mat")
    labels = read_norb(src / f"{PREFIX}-{split}-cat.mat").reshape(-1)
    info = read_norb(src / f"{PREFIX}-{split}-info.mat").reshape(-1, 4)
    keep = np.ones(len(labels), dtype=bool)
    if lighting:
        keep = np.isin(info[:, 3], lighting)
    write_idx(images[keep], labels[keep], out_stem)
    print(f"{split}: {keep.sum()} of {len(labels)} pairs -> {out_stem}-*.idx")


def parse_lighting(text):
    return [int(x) for x in text.split(",")] if text else []


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("src", type=Path, help="directory with the NORB .mat files")
    ap.add_argument("out", type=Path, help="output directory")
    ap.add_argument("--train-lighting", default="", help="comma list of lighting conditions to keep")
    ap.add_argument("--test-lighting", default="", help="comma list of lighting conditions to keep")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    convert(args.src, "training", args.out / "train", parse_lighting(args.train_lighting))
    convert(args.src, "testing", args.out / "test", parse_lighting(args.test_lighting))


if __name__ == "__main__":
    main()
