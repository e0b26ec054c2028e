"""Plot-ready sweep reports: delimited output plus rendered figures.

Each sweep report joins the per-condition summaries into one CSV row per
(swept value, model, task) with the learned-trial ALC band and non-learned
count, and renders the matching figure: mean ALC dots per combination, a
shaded min/max band across learned trials, and gray bars for non-learned
trial counts. CSVs are regenerated byte-identically from the same
summaries.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from . import probe

REPORT_HEADER = "param_value,model,task,mean_alc,min_alc,max_alc,non_learned"

COMBO_COLORS = {
    ("psvrt-baseline", "sr"): "tab:blue",
    ("psvrt-baseline", "sd"): "tab:red",
    ("psvrt-wide", "sd"): "tab:purple",
    ("psvrt-deep", "sd"): "tab:brown",
}

SWEEP_LABELS = {"n": "image side n", "m": "item side m", "k": "item count k"}


def _fmt(value) -> str:
    return "" if value is None else repr(float(value))


def sweep_rows(summaries: list[dict], sweep: str) -> list[dict]:
    """One row per summary matching the sweep's fixed parameters."""
    fixed = probe.SWEEP_FIXED[sweep]
    rows = []
    for doc in summaries:
        params = doc["params"]
        if any(params[key] != val for key, val in fixed.items()):
            continue
        rows.append(
            {
                "param_value": params[sweep],
                "model": doc["arch"],
                "task": doc["task"],
                "mean_alc": doc["mean_alc"],
                "min_alc": doc["min_alc"],
                "max_alc": doc["max_alc"],
                "non_learned": doc["non_learned"],
            }
        )
    rows.sort(key=lambda r: (r["model"], r["task"], r["param_value"]))
    return rows


def sweep_csv(rows: list[dict]) -> str:
    lines = [REPORT_HEADER]
    for r in rows:
        lines.append(
            f"{r['param_value']},{r['model']},{r['task']},"
            f"{_fmt(r['mean_alc'])},{_fmt(r['min_alc'])},{_fmt(r['max_alc'])},{r['non_learned']}"
        )
    return "\n".join(lines) + "\n"


def straining_csv(rows: list[dict]) -> str:
    header = (
        "sweep,value,model,task,mean_alc,min_alc,max_alc,non_learned,"
        "arrangements,arrangements_method,item_patterns"
    )
    lines = [header]
    for r in rows:
        lines.append(
            f"{r['sweep']},{r['value']},{r['arch']},{r['task']},"
            f"{_fmt(r['mean_alc'])},{_fmt(r['min_alc'])},{_fmt(r['max_alc'])},"
            f"{r['non_learned']},{r['arrangements']!r},{r['arrangements_method']},"
            f"{r['item_patterns']}"
        )
    return "\n".join(lines) + "\n"


def render_sweep_figure(rows: list[dict], sweep: str, path, trials: int | None = None) -> None:
    """ALC against the swept parameter, one series per model/task combo."""
    fig, ax = plt.subplots(figsize=(6, 4))
    bar_ax = ax.twinx()
    combos = sorted({(r["model"], r["task"]) for r in rows})
    n_combos = max(len(combos), 1)
    values = sorted({r["param_value"] for r in rows})
    step = min((b - a for a, b in zip(values, values[1:])), default=1)
    width = 0.8 * step / n_combos
    for ci, combo in enumerate(combos):
        series = [r for r in rows if (r["model"], r["task"]) == combo]
        series.sort(key=lambda r: r["param_value"])
        xs = [r["param_value"] for r in series]
        color = COMBO_COLORS.get(combo, None)
        label = f"{combo[0]} / {combo[1].upper()}"
        learned = [r for r in series if r["mean_alc"] is not None]
        if learned:
            lx = [r["param_value"] for r in learned]
            ax.plot(lx, [r["mean_alc"] for r in learned], "o:", color=color, label=label)
            ax.fill_between(
                lx,
                [r["min_alc"] for r in learned],
                [r["max_alc"] for r in learned],
                color=color,
                alpha=0.2,
                linewidth=0,
            )
        offsets = [x + (ci - (n_combos - 1) / 2) * width for x in xs]
        bar_ax.bar(
            offsets,
            [r["non_learned"] for r in series],
            width=width,
            color="gray",
            alpha=0.5,
        )
    ax.set_xlabel(SWEEP_LABELS.get(sweep, sweep))
    ax.set_ylabel("mean ALC (learned trials)")
    ax.set_ylim(0.45, 1.0)
    bar_ax.set_ylabel("non-learned trials", color="gray")
    if trials:
        bar_ax.set_ylim(0, trials)
    ax.legend(fontsize=8, loc="lower left")
    ax.set_title(f"ALC over {SWEEP_LABELS.get(sweep, sweep)}")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def write_reports(
    summaries: list[dict],
    out_dir,
    sweeps=("n", "m", "k"),
    figures: bool = True,
    log=print,
) -> list[Path]:
    """Emit sweep CSVs, straining tables, and figures under out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for sweep in sweeps:
        rows = sweep_rows(summaries, sweep)
        if not rows:
            log(f"[report] warning: no summaries for sweep {sweep!r}")
        csv_path = out / f"sweep_{sweep}.csv"
        csv_path.write_text(sweep_csv(rows))
        written.append(csv_path)
        strain_rows, missing = probe.straining_report(summaries, sweep)
        for combo_value in missing:
            log(f"[report] sweep {sweep}: missing condition {combo_value}")
        strain_path = out / f"straining_{sweep}.csv"
        strain_path.write_text(straining_csv(strain_rows))
        written.append(strain_path)
        if figures and rows:
            trials = None
            for doc in summaries:
                trials = doc.get("config", {}).get("trials", trials)
            fig_path = out / f"sweep_{sweep}.png"
            render_sweep_figure(rows, sweep, fig_path, trials=trials)
            written.append(fig_path)
    return written
