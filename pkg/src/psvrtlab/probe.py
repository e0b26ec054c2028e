"""Analytic subtraction-template probe and arrangement combinatorics.

probe_classify answers same-different directly from pixels, with unlimited
capacity: it scans every pair of disjoint m x m windows for bit-identical
non-empty contents. A naive scan is useless — any two far-apart items donate
matching single-pixel fragments (e.g. each item's top-left ink bit isolated
in a window corner) — so a firing pair must also capture whole clusters:
no stray ink may sit within the (m-1)-wide ring around either window, except
ink that belongs to the partner window. Item boxes of a duplicated pair
always satisfy this, so recall on two-item images is exact by construction,
while fragment matches are rejected and false positives collapse to the
(measured) chance that two distinct items are translates of each other.

count_arrangements gives the number of unordered non-overlapping placement
configurations, the quantity a template-per-arrangement strategy would have
to cover: closed-form inclusion-exclusion for pairs, exhaustive enumeration
for more items, and a Monte Carlo estimator for scales where enumeration is
out of reach.
"""

from __future__ import annotations

import math
from numpy.lib.stride_tricks import sliding_window_view

import numpy as np

from .generator import SDLabel


def _prefix_sums(image: np.ndarray) -> np.ndarray:
    p = np.zeros((image.shape[0] + 1, image.shape[1] + 1), dtype=np.int64)
    p[1:, 1:] = image.cumsum(axis=0).cumsum(axis=1)
    return p


def _rect_ink(p: np.ndarray, r0: int, c0: int, r1: int, c1: int) -> int:
    """Ink count over rows [r0, r1) x cols [c0, c1), clipped to the image."""
    rows, cols = p.shape[0] - 1, p.shape[1] - 1
    r0, c0 = max(r0, 0), max(c0, 0)
    r1, c1 = min(r1, rows), min(c1, cols)
    if r0 >= r1 or c0 >= c1:
        return 0
    return int(p[r1, c1] - p[r0, c1] - p[r1, c0] + p[r0, c0])


def _window_keys(image: np.ndarray, m: int):
    win = sliding_window_view(image, (m, m))
    side = win.shape[0]
    flat = win.reshape(side * side, m * m)
    if m * m <= 64:
        weights = np.left_shift(np.uint64(1), np.arange(m * m, dtype=np.uint64))
        keys = (flat.astype(np.uint64) * weights).sum(axis=1)
    else:
        packed = np.packbits(flat, axis=1)
        keys = np.array([row.tobytes() for row in packed], dtype=object)
    return keys, side


def _pair_fires(p, m: int, a: tuple[int, int], b: tuple[int, int]) -> bool:
    (r1, c1), (r2, c2) = a, b
    if abs(r1 - r2) < m and abs(c1 - c2) < m:
        return False  # windows overlap
    for (ra, ca), (rb, cb) in ((a, b), (b, a)):
        ink_self = _rect_ink(p, ra, ca, ra + m, ca + m)
        ink_dil = _rect_ink(p, ra - m + 1, ca - m + 1, ra + 2 * m - 1, ca + 2 * m - 1)
        stray = ink_dil - ink_self
        in_partner = _rect_ink(
            p,
            max(ra - m + 1, rb),
            max(ca - m + 1, cb),
            min(ra + 2 * m - 1, rb + m),
            min(ca + 2 * m - 1, cb + m),
        )
        if stray != in_partner:
            return False  # stray ink outside the partner: a cut cluster
    return True


def probe_classify(image: np.ndarray, m: int) -> SDLabel:
    """Same iff two disjoint windows carry identical, cleanly captured ink."""
    n = image.shape[0]
    if m > n:
        raise ValueError(f"item side {m} exceeds image side {n}")
    keys, side = _window_keys(image, m)
    p = _prefix_sums(image)
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]
    group_starts = np.flatnonzero(
        np.r_[True, sorted_keys[1:] != sorted_keys[:-1]]
    )
    group_ends = np.r_[group_starts[1:], len(sorted_keys)]
    zero = np.uint64(0) if keys.dtype == np.uint64 else bytes((m * m + 7) // 8)
    for start, end in zip(group_starts, group_ends):
        if end - start < 2 or sorted_keys[start] == zero:
            continue
        idx = order[start:end]
        pos = [(int(i) // side, int(i) % side) for i in idx]
        for i in range(len(pos)):
            for j in range(i + 1, len(pos)):
                if _pair_fires(p, m, pos[i], pos[j]):
                    return SDLabel.SAME
    return SDLabel.DIFFERENT


def probe_report_rows(samples, m: int):
    """Confusion counts of the probe against stored generator labels."""
    tp = fp = tn = fn = 0
    for s in samples:
        pred = probe_classify(s.image, m)
        if s.sd_label == SDLabel.SAME:
            tp += pred == SDLabel.SAME
            fn += pred == SDLabel.DIFFERENT
        else:
            tn += pred == SDLabel.DIFFERENT
            fp += pred == SDLabel.SAME
    return {"tp": int(tp), "fp": int(fp), "tn": int(tn), "fn": int(fn)}


def _feasible(n: int, m: int, k: int) -> None:
    # configurations that merely cannot fit count as 0, not as errors
    if m < 1 or k < 1 or m > n:
        raise ValueError(f"infeasible arrangement query n={n} m={m} k={k}")


def count_arrangements(n: int, m: int, k: int) -> int:
    """Unordered placements of k non-overlapping in-bounds m x m squares.

    k=2 uses inclusion-exclusion over displacement counts; larger k falls
    back to exhaustive depth-first enumeration, which is only tractable for
    small grids.
    """
    _feasible(n, m, k)
    side = n - m + 1
    total = side * side
    if k == 1:
        return total
    if k == 2:
        span = min(m - 1, side - 1)
        s = side + 2 * sum(side - d for d in range(1, span + 1))
        overlapping_pairs = (s * s - total) // 2
        return total * (total - 1) // 2 - overlapping_pairs
    positions = [(r, c) for r in range(side) for c in range(side)]

    def rec(start: int, chosen: list, need: int) -> int:
        if need == 0:
            return 1
        count = 0
        for i in range(start, len(positions) - need + 1):
            r, c = positions[i]
            if all(abs(r - rr) >= m or abs(c - cc) >= m for rr, cc in chosen):
                chosen.append((r, c))
                count += rec(i + 1, chosen, need - 1)
                chosen.pop()
        return count

    return rec(0, [], k)


def estimate_arrangements(
    n: int, m: int, k: int, samples: int = 200_000, rng: np.random.Generator | None = None
) -> float:
    """Monte Carlo estimate of count_arrangements for enumeration-hostile
    scales: sample iid position tuples and scale the non-overlap rate."""
    _feasible(n, m, k)
    if rng is None:
        rng = np.random.default_rng(0)
    side = n - m + 1
    rows = rng.integers(0, side, size=(samples, k))
    cols = rng.integers(0, side, size=(samples, k))
    valid = np.ones(samples, dtype=bool)
    for i in range(k):
        for j in range(i + 1, k):
            valid &= (np.abs(rows[:, i] - rows[:, j]) >= m) | (
                np.abs(cols[:, i] - cols[:, j]) >= m
            )
    total = side * side
    return float(valid.mean() * total**k / math.factorial(k))


ENUMERATION_NODE_BUDGET = 2_000_000


def arrangements_for_report(n: int, m: int, k: int, rng=None) -> tuple[float, str]:
    """Exact count when tractable, otherwise a labeled Monte Carlo estimate."""
    side = n - m + 1
    if k <= 2 or math.comb(side * side, k) <= ENUMERATION_NODE_BUDGET:
        return float(count_arrangements(n, m, k)), "exact"
    return estimate_arrangements(n, m, k, rng=rng), "estimate"


SWEEP_FIXED = {
    "n": {"m": 4, "k": 2},
    "m": {"n": 60, "k": 2},
    "k": {"n": 60, "m": 4},
}


def straining_report(summaries: list[dict], sweep: str, counts: dict | None = None):
    """Join per-condition ALC results with the combinatorial scale of the
    sweep: arrangement counts (how many templates a subtraction strategy
    needs) and item pattern counts 2^(m*m) (how many items exist).

    Returns (rows, missing): rows sorted by (model, task, swept value);
    summaries absent from the input are listed in `missing`, never imputed.
    """
    if sweep not in SWEEP_FIXED:
        raise ValueError(f"unknown sweep {sweep!r}")
    fixed = SWEEP_FIXED[sweep]
    rows = []
    seen = set()
    for doc in summaries:
        params = doc["params"]
        if any(params[key] != val for key, val in fixed.items()):
            continue
        value = params[sweep]
        seen.add((doc["arch"], doc["task"], value))
        n, m, k = params["n"], params["m"], params["k"]
        if counts is not None and (n, m, k) in counts:
            arrangements, method = counts[(n, m, k)]
        else:
            arrangements, method = arrangements_for_report(n, m, k)
        rows.append(
            {
                "sweep": sweep,
                "value": value,
                "arch": doc["arch"],
                "task": doc["task"],
                "mean_alc": doc["mean_alc"],
                "min_alc": doc["min_alc"],
                "max_alc": doc["max_alc"],
                "non_learned": doc["non_learned"],
                "arrangements": arrangements,
                "arrangements_method": method,
                "item_patterns": 1 << (m * m),
            }
        )
    rows.sort(key=lambda r: (r["arch"], r["task"], r["value"]))
    missing = []
    from .trainer import GRID_COMBOS, M_SWEEP, K_SWEEP, N_SWEEP

    values = {"n": N_SWEEP, "m": M_SWEEP, "k": K_SWEEP}[sweep]
    for arch_name, task in GRID_COMBOS:
        for v in values:
            if (arch_name, task, v) not in seen:
                missing.append((arch_name, task, v))
    return rows, missing
