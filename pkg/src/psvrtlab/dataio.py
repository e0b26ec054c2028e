"""Bit-exact dataset files and PBM image export.

Layout (all integers little-endian):

    magic   4 bytes  b"PSVR"
    version u16      currently 1
    m       u16      item side
    n       u16      image side
    k       u16      items per image
    count   u64      number of samples

then per sample:

    image      n rows, each packed MSB-first and padded to a byte boundary
    label      1 byte: bit0 = same-different label (Same=1),
                       bit1 = spatial-relation label (Vertical=1)
    placements k * (row u16, col u16)
    items      k patterns, m rows each, packed like image rows
"""

from __future__ import annotations

import struct

import numpy as np

from .generator import ImageParams, Placement, Sample, SDLabel, SRLabel

MAGIC = b"PSVR"
VERSION = 1
_HEADER = struct.Struct("<4sHHHHQ")


def _pack_rows(bits: np.ndarray) -> bytes:
    return np.packbits(bits, axis=1).tobytes()


def _unpack_rows(buf: bytes, rows: int, cols: int) -> np.ndarray:
    row_bytes = (cols + 7) // 8
    raw = np.frombuffer(buf, dtype=np.uint8).reshape(rows, row_bytes)
    return np.unpackbits(raw, axis=1)[:, :cols]


def sample_record_size(m: int, n: int, k: int) -> int:
    return n * ((n + 7) // 8) + 1 + 4 * k + k * m * ((m + 7) // 8)


def write_dataset(path, params: ImageParams, samples: list[Sample]) -> None:
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, params.m, params.n, params.k, len(samples)))
        for s in samples:
            f.write(_pack_rows(s.image))
            label = (1 if s.sd_label == SDLabel.SAME else 0) | (
                2 if s.sr_label == SRLabel.VERTICAL else 0
            )
            f.write(bytes([label]))
            for p in s.placements:
                f.write(struct.pack("<HH", p.row, p.col))
            for item in s.items:
                f.write(_pack_rows(item))


def read_dataset(path) -> tuple[ImageParams, list[Sample]]:
    with open(path, "rb") as f:
        header = f.read(_HEADER.size)
        magic, version, m, n, k, count = _HEADER.unpack(header)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a PSVR dataset (magic {magic!r})")
        if version != VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        params = ImageParams(m=m, n=n, k=k)
        img_bytes = n * ((n + 7) // 8)
        item_bytes = m * ((m + 7) // 8)
        samples = []
        for _ in range(count):
            image = _unpack_rows(f.read(img_bytes), n, n)
            label = f.read(1)[0]
            placements = [
                Placement(*struct.unpack("<HH", f.read(4))) for _ in range(k)
            ]
            items = [_unpack_rows(f.read(item_bytes), m, m) for _ in range(k)]
            samples.append(
                Sample(
                    image=image,
                    items=items,
                    placements=placements,
                    sd_label=SDLabel(label & 1),
                    sr_label=SRLabel((label >> 1) & 1),
                )
            )
    return params, samples


def write_pbm(path, image: np.ndarray) -> None:
    """Single-image export as binary PBM (P4), one bit per pixel."""
    h, w = image.shape
    with open(path, "wb") as f:
        f.write(f"P4\n{w} {h}\n".encode("ascii"))
        f.write(_pack_rows(image))
