"""Render sigfbm CSV outputs as static figures.

Three figure kinds, one per declared CSV schema:

  hurst_sweep  sweep CSV -> test MSE vs H, one line per (method, seed)
  aq_error     air-quality results CSV -> train/test MSE bars per method
  aq_overlay   overlay CSV -> truth and prediction series per method

No statistic is recomputed here: every plotted value is a CSV column read
verbatim, so a rendered figure always traces back to a manifested run.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

FIGURE_KINDS = ("hurst_sweep", "aq_error", "aq_overlay")

SCHEMAS = {
    "hurst_sweep": [
        "payoff", "H", "seed", "method", "depth_k", "lambda",
        "train_mse", "test_mse", "n_train", "n_test", "n_steps",
    ],
    "aq_error": ["method", "depth_k", "lambda", "train_mse", "test_mse"],
    "aq_overlay": ["timestamp", "truth", "prediction", "method"],
}


class SchemaError(ValueError):
    """The input CSV does not match the declared schema for its figure kind."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    input_csv: str
    output_path: str

    def __post_init__(self) -> None:
        if self.kind not in FIGURE_KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}; choose from {FIGURE_KINDS}")


@dataclass(frozen=True)
class PlotResult:
    """What was rendered: output path plus rows consumed per series key."""

    output_path: str
    rows_per_series: dict


def _read_rows(spec: FigureSpec) -> list[dict]:
    path = Path(spec.input_csv)
    if not path.exists():
        raise SchemaError(f"input CSV not found: {path}")
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        header = reader.fieldnames
        expected = SCHEMAS[spec.kind]
        if header is None:
            raise SchemaError(f"{path}: empty CSV, nothing to plot")
        missing = [c for c in expected if c not in header]
        unexpected = [c for c in header if c not in expected]
        if missing or unexpected:
            raise SchemaError(
                f"{path}: schema mismatch for kind {spec.kind!r}; "
                f"missing columns {missing}, unexpected columns {unexpected}"
            )
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path}: no data rows, nothing to plot")
    return rows


def _plot_hurst_sweep(rows: list[dict], out: str) -> PlotResult:
    series: dict[tuple[str, str], list[tuple[float, float]]] = {}
    payoffs = set()
    for r in rows:
        key = (r["method"], r["seed"])
        series.setdefault(key, []).append((float(r["H"]), float(r["test_mse"])))
        payoffs.add(r["payoff"])
    fig, ax = plt.subplots(figsize=(6, 4))
    counts = {}
    for (method, seed), pts in sorted(series.items()):
        pts = sorted(pts)
        label = method if len({k[1] for k in series}) == 1 else f"{method} (seed {seed})"
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=label)
        counts[f"{method}/{seed}"] = len(pts)
    ax.set_xlabel("Hurst parameter H")
    ax.set_ylabel("test MSE")
    ax.set_title(f"Test error vs H ({', '.join(sorted(payoffs))})")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out)
    plt.close(fig)
    return PlotResult(output_path=out, rows_per_series=counts)


def _plot_aq_error(rows: list[dict], out: str) -> PlotResult:
    labels, train, test = [], [], []
    for r in rows:
        name = r["method"] if r["depth_k"] in ("0", "") else f"{r['method']} (K={r['depth_k']})"
        labels.append(name)
        train.append(float(r["train_mse"]))
        test.append(float(r["test_mse"]))
    x = range(len(labels))
    width = 0.38
    fig, ax = plt.subplots(figsize=(6.5, 4))
    ax.bar([i - width / 2 for i in x], train, width, label="train MSE")
    ax.bar([i + width / 2 for i in x], test, width, label="test MSE")
    ax.set_xticks(list(x))
    ax.set_xticklabels(labels, rotation=15, ha="right")
    ax.set_ylabel("MSE")
    ax.set_title("Air-quality forecasting error by method")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out)
    plt.close(fig)
    return PlotResult(output_path=out, rows_per_series={lb: 1 for lb in labels})


def _plot_aq_overlay(rows: list[dict], out: str) -> PlotResult:
    by_method: dict[str, list[dict]] = {}
    for r in rows:
        by_method.setdefault(r["method"], []).append(r)
    counts = {m: len(rs) for m, rs in by_method.items()}
    if len(set(counts.values())) != 1:
        raise SchemaError(
            f"overlay series lengths differ across methods: {counts}; "
            "each method must contribute the same test steps"
        )
    methods = sorted(by_method)
    fig, axes = plt.subplots(
        1, len(methods), figsize=(4.5 * len(methods), 3.4), sharey=True, squeeze=False
    )
    for ax, method in zip(axes[0], methods):
        rs = by_method[method]
        steps = range(len(rs))
        ax.plot(steps, [float(r["truth"]) for r in rs], label="truth", linewidth=1.2)
        ax.plot(
            steps,
            [float(r["prediction"]) for r in rs],
            label="prediction",
            linewidth=1.0,
            alpha=0.85,
        )
        ax.set_title(method)
        ax.set_xlabel("test step")
        ax.legend()
    axes[0][0].set_ylabel("NO2")
    fig.tight_layout()
    fig.savefig(out)
    plt.close(fig)
    return PlotResult(output_path=out, rows_per_series=counts)


def plot(spec: FigureSpec) -> PlotResult:
    """Render one figure; raises SchemaError (no file written) on bad input."""
    rows = _read_rows(spec)
    Path(spec.output_path).parent.mkdir(parents=True, exist_ok=True)
    if spec.kind == "hurst_sweep":
        return _plot_hurst_sweep(rows, spec.output_path)
    if spec.kind == "aq_error":
        return _plot_aq_error(rows, spec.output_path)
    return _plot_aq_overlay(rows, spec.output_path)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="sigfbm-figures", description="Render sigfbm CSV outputs as figures"
    )
    parser.add_argument("--kind", choices=FIGURE_KINDS, required=True)
    parser.add_argument("--in", dest="input_csv", required=True)
    parser.add_argument("--out", dest="output_path", required=True,
                        help="image path; extension picks the format (svg/png)")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        result = plot(FigureSpec(args.kind, args.input_csv, args.output_path))
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {result.output_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
