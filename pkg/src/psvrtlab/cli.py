"""Command-line entry point.

Subcommands: gen (dataset files), train (one condition), grid (parameter
sweeps), probe (subtraction-template report), report (plot-ready CSVs and
figures from stored summaries). Every run directory starts with a manifest
holding the resolved configuration and seeds, written before any long
computation, so a run can be reproduced from the manifest alone.

Exit codes: 0 success, 1 usage error, 2 infeasible image parameters,
3 runtime fault (I/O or numeric).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, arch, dataio, probe, report, trainer
from .generator import (
    GeneratorError,
    ImageParams,
    InfeasibleParamsError,
    derive_rng,
    generate_batch,
)
from .nnkit import NumericFaultError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_FAULT = 3

OUT_ROOT_ENV = "PSVRTLAB_OUT"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _default_out(command: str) -> Path:
    root = Path(os.environ.get(OUT_ROOT_ENV, "runs"))
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S")
    return root / f"{command}-{stamp}"


def write_manifest(out_dir: Path, command: str, config: dict, outputs: list[str]) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = {
        "tool": "psvrtlab",
        "version": __version__,
        "command": command,
        "config": config,
        "outputs": outputs,
        "created": datetime.now(timezone.utc).isoformat(),
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def _image_params(args) -> ImageParams:
    return ImageParams(m=args.m, n=args.n, k=args.k, seed=args.seed)


def _add_params_flags(p, seed_default=0):
    p.add_argument("--m", type=int, required=True, help="item side in pixels")
    p.add_argument("--n", type=int, required=True, help="image side in pixels")
    p.add_argument("--k", type=int, required=True, help="number of items")
    p.add_argument("--seed", type=int, default=seed_default, help="data stream seed")


def cmd_gen(args) -> int:
    if args.count % 2 != 0:
        raise ValueError(f"--count must be even for balanced classes, got {args.count}")
    params = _image_params(args)
    out_path = Path(args.out) if args.out else _default_out("gen") / "dataset.psvr"
    out_path.parent.mkdir(parents=True, exist_ok=True)
    config = {
        "m": args.m, "n": args.n, "k": args.k, "seed": args.seed,
        "task": args.task, "count": args.count, "export_pbm": args.export_pbm,
    }
    write_manifest(out_path.parent, "gen", config, [out_path.name])
    rng = derive_rng(args.seed, 0, 0, 0)
    samples = generate_batch(rng, params, args.task, args.count)
    dataio.write_dataset(out_path, params, samples)
    for i in range(min(args.export_pbm, len(samples))):
        dataio.write_pbm(out_path.with_suffix(f".{i}.pbm"), samples[i].image)
    print(f"wrote {len(samples)} samples to {out_path}")
    return EXIT_OK


def _train_config(args) -> trainer.TrainConfig:
    return trainer.TrainConfig(
        batch_size=args.batch_size,
        image_budget=args.budget,
        eval_interval=args.eval_interval,
        eval_set_size=args.eval_size,
        learned_threshold=args.threshold,
        trials=args.trials,
        base_seed=args.seed,
    )


def _add_train_flags(p, trials_default):
    p.add_argument("--budget", type=int, default=500_000, help="training images per trial")
    p.add_argument("--batch-size", type=int, default=50)
    p.add_argument("--eval-interval", type=int, default=200, help="batches between samples")
    p.add_argument("--eval-size", type=int, default=2_000, help="held-out set size")
    p.add_argument("--threshold", type=float, default=0.55, help="learned criterion")
    p.add_argument("--trials", type=int, default=trials_default)
    p.add_argument("--workers", type=int, default=1, help="parallel trial processes")
    p.add_argument("--out", type=str, default=None, help="run directory")


def cmd_train(args) -> int:
    params = _image_params(args)
    config = _train_config(args)
    spec = arch.build(args.arch, input_side=args.n)
    out_dir = Path(args.out) if args.out else _default_out("train")
    config_doc = {"arch": args.arch, "task": args.task, **vars(args)}
    config_doc.pop("func", None)
    write_manifest(out_dir, "train", config_doc, ["curves/", "summaries/"])
    summary = trainer.run_condition(spec, params, args.task, config, workers=args.workers)
    trainer.save_condition(out_dir, summary, config, arch.spec_to_text(spec))
    for r in summary.trials:
        status = "fault" if r.fault else ("learned" if r.learned else "non-learned")
        print(
            f"trial {r.trial}: alc={r.alc if r.alc is not None else 'n/a'} "
            f"final={r.final_accuracy} {status} ({r.wall_time:.1f}s)"
        )
    mean = summary.mean_alc if summary.mean_alc is not None else "n/a"
    print(f"{summary.condition_key}: mean ALC {mean}, non-learned {summary.non_learned}")
    return EXIT_OK


COMBO_ALIASES = {
    "baseline": "psvrt-baseline",
    "wide": "psvrt-wide",
    "deep": "psvrt-deep",
}


def _parse_combos(text: str):
    combos = []
    for part in text.split(","):
        name, _, task = part.strip().partition(":")
        name = COMBO_ALIASES.get(name, name)
        if task not in ("sd", "sr") or name not in arch.BUILDERS:
            raise ValueError(f"bad combo {part!r}; expected e.g. baseline:sd")
        combos.append((name, task))
    return tuple(combos)


def cmd_grid(args) -> int:
    config = _train_config(args)
    if args.full_scale:
        config = trainer.TrainConfig(
            batch_size=50,
            image_budget=trainer.PAPER_IMAGE_BUDGET,
            eval_interval=args.eval_interval,
            eval_set_size=args.eval_size,
            learned_threshold=0.55,
            trials=10,
            base_seed=args.seed,
        )
    sweeps = ("n", "m", "k") if args.sweep == "all" else (args.sweep,)
    combos = _parse_combos(args.combos) if args.combos else trainer.GRID_COMBOS
    out_dir = Path(args.out) if args.out else _default_out("grid")
    config_doc = {k: v for k, v in vars(args).items() if k != "func"}
    config_doc["resolved_config"] = json.loads(json.dumps(config.__dict__))
    write_manifest(out_dir, "grid", config_doc, ["curves/", "summaries/"])
    trainer.run_grid(
        config, out_dir, sweeps=sweeps, combos=combos, resume=args.resume, workers=args.workers
    )
    return EXIT_OK


def cmd_probe(args) -> int:
    params = _image_params(args)
    out_dir = Path(args.out) if args.out else _default_out("probe")
    config_doc = {k: v for k, v in vars(args).items() if k != "func"}
    write_manifest(out_dir, "probe", config_doc, ["probe_report.csv"])
    rng = derive_rng(args.seed, 0, 0, 0)
    samples = generate_batch(rng, params, "sd", args.count)
    stats = probe.probe_report_rows(samples, params.m)
    total = args.count
    correct = stats["tp"] + stats["tn"]
    recall = stats["tp"] / max(stats["tp"] + stats["fn"], 1)
    fp_rate = stats["fp"] / max(stats["fp"] + stats["tn"], 1)
    arrangements, method = probe.arrangements_for_report(params.n, params.m, params.k)
    lines = [
        "m,n,k,count,accuracy,recall,false_positive_rate,tp,fp,tn,fn,"
        "arrangements,arrangements_method,item_patterns",
        f"{params.m},{params.n},{params.k},{total},{correct / total!r},{recall!r},"
        f"{fp_rate!r},{stats['tp']},{stats['fp']},{stats['tn']},{stats['fn']},"
        f"{arrangements!r},{method},{1 << (params.m ** 2)}",
    ]
    out_path = out_dir / "probe_report.csv"
    out_path.write_text("\n".join(lines) + "\n")
    print(f"probe accuracy {correct / total:.4f}, recall {recall:.4f}, "
          f"fp rate {fp_rate:.5f} -> {out_path}")
    return EXIT_OK


def cmd_report(args) -> int:
    run_dir = Path(args.run)
    summaries_dir = run_dir / "summaries"
    if not summaries_dir.is_dir():
        raise FileNotFoundError(f"no summaries directory under {run_dir}")
    summaries = [
        trainer.load_summary(path) for path in sorted(summaries_dir.glob("*.json"))
    ]
    sweeps = ("n", "m", "k") if args.sweep == "all" else (args.sweep,)
    out_dir = Path(args.out) if args.out else run_dir / "report"
    config_doc = {k: v for k, v in vars(args).items() if k != "func"}
    write_manifest(out_dir, "report", config_doc, [f"sweep_{s}.csv" for s in sweeps])
    written = report.write_reports(summaries, out_dir, sweeps=sweeps, figures=not args.no_figures)
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="psvrtlab", description=__doc__)
    parser.add_argument("--version", action="version", version=f"psvrtlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a dataset file", parents=[], add_help=True)
    _add_params_flags(p)
    p.add_argument("--task", choices=("sd", "sr"), required=True)
    p.add_argument("--count", type=int, required=True, help="samples (even)")
    p.add_argument("--out", type=str, default=None, help="output .psvr path")
    p.add_argument("--export-pbm", type=int, default=0, metavar="N",
                   help="dump the first N images as PBM")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train one condition")
    p.add_argument("--arch", choices=sorted(arch.BUILDERS), required=True)
    p.add_argument("--task", choices=("sd", "sr"), required=True)
    _add_params_flags(p)
    _add_train_flags(p, trials_default=1)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("grid", help="run parameter sweeps")
    p.add_argument("--sweep", choices=("n", "m", "k", "all"), required=True)
    p.add_argument("--combos", type=str, default=None,
                   help="comma list like baseline:sr,baseline:sd,wide:sd,deep:sd")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resume", action="store_true",
                   help="skip conditions whose summaries exist")
    p.add_argument("--full-scale", action="store_true",
                   help="20M-image / 10-trial protocol instead of desk scale")
    _add_train_flags(p, trials_default=10)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("probe", help="subtraction-template probe report")
    _add_params_flags(p)
    p.add_argument("--count", type=int, default=10_000, help="samples (even)")
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("report", help="plot-ready CSVs and figures from summaries")
    p.add_argument("--run", type=str, required=True, help="run directory with summaries/")
    p.add_argument("--sweep", choices=("n", "m", "k", "all"), default="all")
    p.add_argument("--out", type=str, default=None)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleParamsError as exc:
        print(f"error: infeasible parameters: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GeneratorError, NumericFaultError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAULT


if __name__ == "__main__":
    raise SystemExit(main())
