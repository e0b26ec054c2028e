"""Streaming trainer, learning curves, ALC, and the straining experiment grid.

A trial never reuses data: every training batch is generated fresh from a
stream keyed by (data seed, trial, batch index). Accuracy is sampled every
eval_interval batches on both a sliding training window and a fixed held-out
set; the ALC of a trial is the plain mean of its held-out samples, and a
trial counts as learned once held-out accuracy exceeds the 55% criterion.

Condition = (architecture, task, image params). A condition runs `trials`
independently initialized trials and reports mean/min/max ALC over the
learned ones plus the non-learned count. run_grid sweeps image parameters
(n, m, k) for the model/task combinations of interest and persists one
summary file per condition, so interrupted grids resume without recomputing.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import arch
from .generator import (
    NS_EVAL,
    NS_INIT,
    NS_TRAIN,
    ImageParams,
    batch_arrays,
    batch_stream,
    derive_rng,
    generate_batch,
)
from .nnkit import AdamState, NumericFaultError, accuracy, adam_step, compile_network

N_SWEEP = (30, 60, 90, 120, 150, 180)
M_SWEEP = (3, 4, 5, 6, 7)
K_SWEEP = (2, 3, 4, 5, 6)

# model/task combinations reported per sweep panel
GRID_COMBOS = (
    ("psvrt-baseline", "sr"),
    ("psvrt-baseline", "sd"),
    ("psvrt-wide", "sd"),
    ("psvrt-deep", "sd"),
)

PAPER_IMAGE_BUDGET = 20_000_000


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 50
    image_budget: int = 500_000
    eval_interval: int = 200  # batches between accuracy samples
    eval_set_size: int = 2_000
    learned_threshold: float = 0.55
    trials: int = 10
    base_seed: int = 0
    lr: float = 1e-4

    def __post_init__(self):
        if self.image_budget % self.batch_size != 0:
            raise ValueError("image budget must be divisible by batch size")
        if not (0.5 < self.learned_threshold < 1.0):
            raise ValueError("learned threshold must lie in (0.5, 1)")


@dataclass
class LearningCurve:
    images_seen: list[int] = field(default_factory=list)
    train_acc: list[float] = field(default_factory=list)
    eval_acc: list[float] = field(default_factory=list)

    def append(self, images: int, train: float, eval_: float) -> None:
        self.images_seen.append(images)
        self.train_acc.append(train)
        self.eval_acc.append(eval_)


@dataclass
class TrialResult:
    trial: int
    seed: int
    curve: LearningCurve
    alc: float | None
    learned: bool
    final_accuracy: float | None
    wall_time: float
    fault: bool = False


@dataclass
class ConditionSummary:
    condition_key: str
    arch_name: str
    task: str
    params: ImageParams
    mean_alc: float | None
    min_alc: float | None
    max_alc: float | None
    non_learned: int
    trials: list[TrialResult]


def _mean(values) -> float:
    # a mean of identical samples is that sample, float summation aside
    if len(set(values)) == 1:
        return float(values[0])
    return float(math.fsum(values) / len(values))


def alc(curve: LearningCurve) -> float:
    """Normalized area under the learning curve: the mean of the uniformly
    spaced held-out accuracy samples. A curve pinned at chance gives 0.5."""
    if not curve.eval_acc:
        raise ValueError("cannot compute ALC of an empty curve")
    return _mean(curve.eval_acc)


def trial_init_seed(base_seed: int, trial: int) -> int:
    return int(
        np.random.SeedSequence(entropy=base_seed, spawn_key=(NS_INIT, trial)).generate_state(
            1, np.uint64
        )[0]
    )


def evaluation_set(params: ImageParams, task: str, size: int):
    """The fixed held-out set for a condition, balanced and seed-stable."""
    rng = derive_rng(params.seed, NS_EVAL, 0, 0)
    return batch_arrays(generate_batch(rng, params, task, size), task)


def train_trial(
    spec: arch.NetworkSpec,
    params: ImageParams,
    task: str,
    config: TrainConfig,
    trial: int,
) -> TrialResult:
    """One from-scratch training run; returns its completed curve and ALC."""
    t0 = time.perf_counter()
    init_seed = trial_init_seed(config.base_seed, trial)
    net = compile_network(spec, seed=init_seed, dtype=np.float32)
    state = AdamState.for_params(net.params, lr=config.lr)
    eval_x, eval_y = evaluation_set(params, task, config.eval_set_size)

    curve = LearningCurve()
    fault = False
    n_batches = config.image_budget // config.batch_size
    window_correct = 0
    window_seen = 0
    try:
        stream = batch_stream(params, task, config.batch_size, stream=NS_TRAIN, trial=trial)
        for b in range(1, n_batches + 1):
            x, y = batch_arrays(next(stream), task)
            loss, logits = net.loss_and_grad(x, y)
            adam_step(net.params, net.grads, state)
            net.step += 1
            window_correct += int((logits.argmax(axis=1) == y).sum())
            window_seen += len(y)
            if b % config.eval_interval == 0:
                eval_acc = accuracy(net, eval_x, eval_y, batch=100)
                curve.append(b * config.batch_size, window_correct / window_seen, eval_acc)
                window_correct = 0
                window_seen = 0
    except NumericFaultError:
        fault = True

    learned = (not fault) and any(a > config.learned_threshold for a in curve.eval_acc)
    return TrialResult(
        trial=trial,
        seed=init_seed,
        curve=curve,
        alc=alc(curve) if curve.eval_acc else None,
        learned=learned,
        final_accuracy=curve.eval_acc[-1] if curve.eval_acc else None,
        wall_time=time.perf_counter() - t0,
        fault=fault,
    )


def condition_key(arch_name: str, task: str, params: ImageParams) -> str:
    return f"{arch_name}-{task}-n{params.n}-m{params.m}-k{params.k}"


def summarize(arch_name: str, task: str, params: ImageParams, results: list[TrialResult]) -> ConditionSummary:
    learned_alcs = [r.alc for r in results if r.learned]
    return ConditionSummary(
        condition_key=condition_key(arch_name, task, params),
        arch_name=arch_name,
        task=task,
        params=params,
        mean_alc=_mean(learned_alcs) if learned_alcs else None,
        min_alc=min(learned_alcs) if learned_alcs else None,
        max_alc=max(learned_alcs) if learned_alcs else None,
        non_learned=sum(1 for r in results if not r.learned),
        trials=results,
    )


def _trial_task(args):
    spec, params, task, config, trial = args
    return train_trial(spec, params, task, config, trial)


def run_condition(
    spec: arch.NetworkSpec,
    params: ImageParams,
    task: str,
    config: TrainConfig,
    workers: int = 1,
) -> ConditionSummary:
    """All trials of one condition, optionally across worker processes.

    Trials are independent and individually seeded, so results do not
    depend on scheduling.
    """
    jobs = [(spec, params, task, config, t) for t in range(config.trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_trial_task, jobs))
    else:
        results = [_trial_task(j) for j in jobs]
    return summarize(spec.name, task, params, results)


# ---------------------------------------------------------------------------
# persistence: curve CSVs and summary records

CURVE_HEADER = "condition_key,trial,images_seen,train_acc,eval_acc"


def curve_csv(key: str, result: TrialResult) -> str:
    lines = [CURVE_HEADER]
    c = result.curve
    for i in range(len(c.images_seen)):
        lines.append(f"{key},{result.trial},{c.images_seen[i]},{c.train_acc[i]!r},{c.eval_acc[i]!r}")
    return "\n".join(lines) + "\n"


def summary_record(summary: ConditionSummary, config: TrainConfig, spec_text: str) -> str:
    """Deterministic JSON for a condition; wall times stay out so resumed
    and uninterrupted grids produce byte-identical files."""
    doc = {
        "condition_key": summary.condition_key,
        "arch": summary.arch_name,
        "task": summary.task,
        "params": {"m": summary.params.m, "n": summary.params.n, "k": summary.params.k,
                   "seed": summary.params.seed},
        "mean_alc": summary.mean_alc,
        "min_alc": summary.min_alc,
        "max_alc": summary.max_alc,
        "non_learned": summary.non_learned,
        "trials": [
            {
                "trial": r.trial,
                "seed": r.seed,
                "alc": r.alc,
                "learned": r.learned,
                "final_accuracy": r.final_accuracy,
                "fault": r.fault,
            }
            for r in summary.trials
        ],
        "config": asdict(config),
        "arch_spec_text": spec_text,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def load_summary(path) -> dict:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def save_condition(out_dir, summary: ConditionSummary, config: TrainConfig, spec_text: str) -> None:
    out = Path(out_dir)
    (out / "curves").mkdir(parents=True, exist_ok=True)
    (out / "summaries").mkdir(parents=True, exist_ok=True)
    for r in summary.trials:
        (out / "curves" / f"{summary.condition_key}-t{r.trial}.csv").write_text(
            curve_csv(summary.condition_key, r)
        )
    (out / "summaries" / f"{summary.condition_key}.json").write_text(
        summary_record(summary, config, spec_text)
    )


def grid_conditions(sweep: str, base_seed: int = 0):
    """(arch_name, task, ImageParams) triples for one parameter sweep."""
    if sweep == "n":
        points = [ImageParams(m=4, n=n, k=2, seed=base_seed) for n in N_SWEEP]
    elif sweep == "m":
        points = [ImageParams(m=m, n=60, k=2, seed=base_seed) for m in M_SWEEP]
    elif sweep == "k":
        points = [ImageParams(m=4, n=60, k=k, seed=base_seed) for k in K_SWEEP]
    else:
        raise ValueError(f"unknown sweep {sweep!r}; expected n, m, or k")
    return [(name, task, p) for p in points for name, task in GRID_COMBOS]


def run_grid(
    config: TrainConfig,
    out_dir,
    sweeps=("n", "m", "k"),
    combos=GRID_COMBOS,
    resume: bool = True,
    workers: int = 1,
    log=print,
) -> list[ConditionSummary | dict]:
    """Run the selected sweeps, persisting each condition as it completes.

    With resume=True, conditions whose summary file already exists are
    loaded and reported, never recomputed or overwritten.
    """
    out = Path(out_dir)
    results: list = []
    for sweep in sweeps:
        for arch_name, task, params in grid_conditions(sweep, config.base_seed):
            if (arch_name, task) not in combos:
                continue
            key = condition_key(arch_name, task, params)
            summary_path = out / "summaries" / f"{key}.json"
            if resume and summary_path.exists():
                log(f"[grid] {key}: complete, skipping")
                results.append(load_summary(summary_path))
                continue
            spec = arch.build(arch_name, input_side=params.n)
            log(f"[grid] {key}: running {config.trials} trials")
            summary = run_condition(spec, params, task, config, workers=workers)
            save_condition(out, summary, config, arch.spec_to_text(spec))
            log(
                f"[grid] {key}: mean ALC "
                f"{summary.mean_alc if summary.mean_alc is not None else 'n/a'} "
                f"(non-learned {summary.non_learned}/{config.trials})"
            )
            results.append(summary)
    return results
