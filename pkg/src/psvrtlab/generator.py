"""PSVRT image generator.

Images are n x n binary arrays containing k non-overlapping m x m random
bit patterns ("items") on a zero background. Every image carries both task
labels: same-different (does some pair of items match bit-for-bit?) and
spatial-relation (are the items arranged horizontally or vertically, by the
45-degree rule on pairwise center displacements?).

All sampling goes through explicit numpy Generators so that every sample is
reproducible from (seed, stream, index). Nothing in here mutates shared
state; callers may generate from independent streams concurrently.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

ITEM_REDRAW_CAP = 10_000
PLACEMENT_REDRAW_CAP = 100_000

# namespaces for derive_rng so independent streams never collide
NS_SAMPLE = 0
NS_TRAIN = 1
NS_EVAL = 2
NS_INIT = 3


class GeneratorError(Exception):
    """Base class for generator failures."""


class InfeasibleParamsError(GeneratorError):
    """k non-overlapping m x m items cannot fit inside an n x n image."""


class InfeasibleDistinctSetError(InfeasibleParamsError):
    """Fewer than k distinct non-zero m x m patterns exist."""


class PlacementTimeoutError(GeneratorError):
    """Placement rejection sampling exceeded its redraw cap."""


class GeneratorDegenerateError(GeneratorError):
    """Item rejection sampling exhausted its redraw cap."""


class SDLabel(enum.IntEnum):
    DIFFERENT = 0
    SAME = 1


class SRLabel(enum.IntEnum):
    HORIZONTAL = 0
    VERTICAL = 1


TASKS = ("sd", "sr")


def derive_rng(seed: int, *path: int) -> np.random.Generator:
    """Fresh Generator for a (seed, path) coordinate, stable across runs."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(path)))


@dataclass(frozen=True)
class ImageParams:
    """The generator triple (m, n, k) plus the RNG seed of its image stream."""

    m: int
    n: int
    k: int
    seed: int = 0

    def __post_init__(self):
        if self.m < 1:
            raise InfeasibleParamsError(f"item side m={self.m} must be >= 1")
        if self.k < 2:
            raise InfeasibleParamsError(f"item count k={self.k} must be >= 2")
        if self.m > self.n:
            raise InfeasibleParamsError(f"item side m={self.m} exceeds image side n={self.n}")
        if self.k > (self.n // self.m) ** 2:
            raise InfeasibleParamsError(
                f"cannot place {self.k} non-overlapping {self.m}x{self.m} items "
                f"inside a {self.n}x{self.n} image"
            )

    @property
    def max_offset(self) -> int:
        return self.n - self.m


@dataclass(frozen=True)
class Placement:
    """Top-left pixel offset of an item's m x m square."""

    row: int
    col: int

    def center(self, m: int) -> tuple[float, float]:
        return (self.row + (m - 1) / 2, self.col + (m - 1) / 2)


@dataclass
class Sample:
    """One rendered image with its items, placements, and both labels."""

    image: np.ndarray
    items: list  # k arrays of shape (m, m), dtype uint8
    placements: list  # k Placement
    sd_label: SDLabel
    sr_label: SRLabel

    def label(self, task: str) -> int:
        return int(self.sd_label if task == "sd" else self.sr_label)


def sample_item(rng: np.random.Generator, m: int) -> np.ndarray:
    """Draw an m x m pattern of iid uniform bits, rejecting the all-zero one."""
    if m < 1:
        raise InfeasibleParamsError(f"item side m={m} must be >= 1")
    for _ in range(ITEM_REDRAW_CAP):
        bits = rng.integers(0, 2, size=(m, m), dtype=np.uint8)
        if bits.any():
            return bits
    raise GeneratorDegenerateError(f"no visible {m}x{m} pattern after {ITEM_REDRAW_CAP} draws")


def sample_distinct_items(rng: np.random.Generator, m: int, k: int) -> list[np.ndarray]:
    """Draw k pairwise-distinct patterns, each uniform over the valid ones."""
    if k < 2:
        raise InfeasibleParamsError(f"need k >= 2 items, got {k}")
    if m * m <= 64 and (1 << (m * m)) - 1 < k:
        raise InfeasibleDistinctSetError(
            f"only {(1 << (m * m)) - 1} distinct non-zero {m}x{m} patterns exist, need {k}"
        )
    items: list[np.ndarray] = []
    seen: set[bytes] = set()
    draws = 0
    while len(items) < k:
        pat = sample_item(rng, m)
        key = pat.tobytes()
        if key not in seen:
            seen.add(key)
            items.append(pat)
        draws += 1
        if draws > ITEM_REDRAW_CAP:
            raise GeneratorDegenerateError(
                f"could not draw {k} distinct {m}x{m} patterns in {ITEM_REDRAW_CAP} attempts"
            )
    return items


def pair_angle_deg(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Orientation of the segment joining two centers, in [0, 90] degrees."""
    return math.degrees(math.atan2(abs(a[0] - b[0]), abs(a[1] - b[1])))


# Guard against float noise at the 45-degree boundary: configurations whose
# pair angles average to exactly 45 (e.g. {0, 45, 90}) must label Vertical.
_ANGLE_TIE_EPS = 1e-9


def sr_rule(centers: list[tuple[float, float]]) -> SRLabel:
    """Vertical iff the mean pairwise center orientation is >= 45 degrees."""
    if len(centers) < 2:
        raise ValueError(f"sr_rule needs at least 2 centers, got {len(centers)}")
    angles = [
        pair_angle_deg(centers[i], centers[j])
        for i in range(len(centers))
        for j in range(i + 1, len(centers))
    ]
    mean = math.fsum(angles) / len(angles)
    return SRLabel.VERTICAL if mean >= 45.0 - _ANGLE_TIE_EPS else SRLabel.HORIZONTAL


def sd_rule(items: list[np.ndarray]) -> SDLabel:
    """Same iff some pair of items is bit-identical."""
    if len(items) < 2:
        raise ValueError(f"sd_rule needs at least 2 items, got {len(items)}")
    side = items[0].shape
    keys = set()
    for it in items:
        if it.shape != side:
            raise ValueError(f"mixed item sizes: {it.shape} vs {side}")
        key = it.tobytes()
        if key in keys:
            return SDLabel.SAME
        keys.add(key)
    return SDLabel.DIFFERENT


def _overlap_free(rows: np.ndarray, cols: np.ndarray, m: int) -> bool:
    for i in range(len(rows)):
        for j in range(i + 1, len(rows)):
            if abs(int(rows[i]) - int(rows[j])) < m and abs(int(cols[i]) - int(cols[j])) < m:
                return False
    return True


def place_items(
    rng: np.random.Generator,
    params: ImageParams,
    target_sr: SRLabel | None = None,
    redraw_cap: int = PLACEMENT_REDRAW_CAP,
) -> list[Placement]:
    """Uniform non-overlapping placements, optionally conditioned on the SR label.

    Each attempt draws all k offsets iid uniform over the in-bounds range and
    rejects the whole configuration on any overlap (and, if target_sr is
    given, on a label mismatch), so accepted configurations are uniform over
    valid ones and label conditioning does not distort the geometry.
    """
    hi = params.max_offset + 1
    for _ in range(redraw_cap):
        rows = rng.integers(0, hi, size=params.k)
        cols = rng.integers(0, hi, size=params.k)
        if not _overlap_free(rows, cols, params.m):
            continue
        placements = [Placement(int(r), int(c)) for r, c in zip(rows, cols)]
        if target_sr is not None:
            if sr_rule([p.center(params.m) for p in placements]) != target_sr:
                continue
        return placements
    raise PlacementTimeoutError(
        f"no valid placement for m={params.m} n={params.n} k={params.k} "
        f"target={target_sr} after {redraw_cap} redraws"
    )


def render(items: list[np.ndarray], placements: list[Placement], n: int) -> np.ndarray:
    """Paint items onto a zero n x n background at their placements."""
    image = np.zeros((n, n), dtype=np.uint8)
    for item, pos in zip(items, placements):
        m = item.shape[0]
        if pos.row < 0 or pos.col < 0 or pos.row + m > n or pos.col + m > n:
            raise ValueError(f"placement {pos} puts an {m}x{m} item outside a {n}x{n} image")
        image[pos.row : pos.row + m, pos.col : pos.col + m] = item
    return image


def _sample_sd_items(rng, params: ImageParams, target: SDLabel) -> list[np.ndarray]:
    if target == SDLabel.DIFFERENT:
        return sample_distinct_items(rng, params.m, params.k)
    base = sample_distinct_items(rng, params.m, params.k - 1) if params.k > 2 else [
        sample_item(rng, params.m)
    ]
    return [base[0].copy()] + base


def generate_sample(
    rng: np.random.Generator,
    params: ImageParams,
    task: str,
    target_label: int | None = None,
) -> Sample:
    """Construct one sample whose `task` label equals `target_label`.

    SD targets are built constructively (Same duplicates exactly one pattern
    into a pair, the rest distinct; Different draws all-distinct patterns).
    SR targets are met by redrawing placements until the rule matches. The
    untargeted aspect stays at its unconditioned law; for SR-task samples the
    items are a fair duplicate-pair/all-distinct coin so the image
    distribution matches the SD task's exactly.
    """
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}, expected one of {TASKS}")
    if task == "sd":
        target = SDLabel(target_label) if target_label is not None else SDLabel(rng.integers(0, 2))
        items = _sample_sd_items(rng, params, target)
        placements = place_items(rng, params)
    else:
        target = SRLabel(target_label) if target_label is not None else SRLabel(rng.integers(0, 2))
        items = _sample_sd_items(rng, params, SDLabel(rng.integers(0, 2)))
        placements = place_items(rng, params, target_sr=target)
    image = render(items, placements, params.n)
    sample = Sample(
        image=image,
        items=items,
        placements=placements,
        sd_label=sd_rule(items),
        sr_label=sr_rule([p.center(params.m) for p in placements]),
    )
    assert sample.label(task) == int(target)
    return sample


def generate_batch(
    rng: np.random.Generator, params: ImageParams, task: str, size: int
) -> list[Sample]:
    """Class-balanced shuffled batch: exactly size/2 of each task label."""
    if size % 2 != 0:
        raise ValueError(f"batch size must be even, got {size}")
    targets = np.repeat([0, 1], size // 2)
    rng.shuffle(targets)
    return [generate_sample(rng, params, task, int(t)) for t in targets]


def batch_stream(params: ImageParams, task: str, batch_size: int, stream: int = NS_TRAIN, trial: int = 0):
    """Infinite iterator of balanced batches; batch b depends only on
    (params.seed, stream, trial, b), so streams are resumable and never
    repeat across batch indices."""
    b = 0
    while True:
        rng = derive_rng(params.seed, stream, trial, b)
        yield generate_batch(rng, params, task, batch_size)
        b += 1


def batch_arrays(samples: list[Sample], task: str, dtype=np.float32):
    """Stack a batch into network inputs: (N, 1, n, n) floats and int labels."""
    x = np.stack([s.image for s in samples]).astype(dtype)[:, None, :, :]
    y = np.array([s.label(task) for s in samples], dtype=np.int64)
    return x, y
