"""Command-line entry point: simulate, signature, moments, sweep, airquality.

Every run writes a manifest (config echo plus sha256 of each artifact) into
the output directory, so results are regenerable from the manifest alone.
Exit codes: 0 success, 2 usage error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import airquality, experiments, moment_lab
from .errors import DomainError
from .fbm import FbmConfig, path_from_csv, path_to_csv, sample_fbm_paths
from .siglasso import CvPlan
from .tensor_sig import path_signature, signature_to_csv, time_augment

DATASET_ENV = "SIGFBM_AIRQUALITY_DATA"


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _config_echo(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func"}


def _write_manifest(out_dir: Path, command: str, config: dict, artifacts: Sequence[Path]) -> None:
    manifest = {
        "command": command,
        "config": config,
        "artifacts": {p.name: _sha256(p) for p in sorted(artifacts)},
    }
    with open(out_dir / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def _ensure_out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _positive_hurst(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"Hurst parameter must lie in (0, 1), got {value}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _h_grid(text: str) -> list[float]:
    """Parse 'start:stop:step' or a comma-separated list."""
    if ":" in text:
        start, stop, step = (float(tok) for tok in text.split(":"))
        if step <= 0:
            raise argparse.ArgumentTypeError("h grid step must be positive")
        grid = []
        value = start
        while value <= stop + 1e-12:
            grid.append(round(value, 10))
            value += step
    else:
        grid = [float(tok) for tok in text.split(",") if tok.strip()]
    for h in grid:
        if not 0.0 < h < 1.0:
            raise argparse.ArgumentTypeError(f"Hurst grid value {h} outside (0, 1)")
    return grid


def _pair(text: str) -> tuple[int, int]:
    try:
        p, q = (int(tok) for tok in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'p,q', got {text!r}") from None
    if p < 0 or q < 0:
        raise argparse.ArgumentTypeError("word lengths must be nonnegative")
    return p, q


def cmd_simulate(args) -> int:
    out = _ensure_out_dir(args)
    cfg = FbmConfig(
        h=args.h, d=args.d, n_steps=args.n_steps, horizon_t=args.horizon,
        method=args.method, seed=args.seed,
    )
    paths = sample_fbm_paths(cfg, args.paths)
    written = []
    for i, p in enumerate(paths):
        target = out / f"path_{i:04d}.csv"
        with open(target, "w") as f:
            path_to_csv(p, f)
        written.append(target)
    _write_manifest(out, "simulate", _config_echo(args), written)
    print(f"wrote {len(written)} path files to {out}")
    return 0


def cmd_signature(args) -> int:
    out = _ensure_out_dir(args)
    with open(args.infile) as f:
        path = path_from_csv(f)
    if args.augment:
        path = time_augment(path)
    sig = path_signature(path, args.depth)
    target = out / (Path(args.infile).stem + f"_sig_k{args.depth}.csv")
    with open(target, "w") as f:
        signature_to_csv(sig, f)
    _write_manifest(out, "signature", _config_echo(args), [target])
    print(f"wrote {target}")
    return 0


def cmd_moments(args) -> int:
    out = _ensure_out_dir(args)

    def one_cell(cell):
        h, (p, q) = cell
        reports, skipped = moment_lab.bound_sweep(
            args.regime, [h], [(p, q)], args.paths, args.n_steps, args.seed,
            s=args.interval[0], t=args.interval[1],
        )
        return reports, skipped

    cells = [(h, pair) for h in args.h for pair in args.pairs]
    reports, skipped = [], []
    if args.threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=args.threads) as pool:
            for rep, skip in pool.map(one_cell, cells):
                reports.extend(rep)
                skipped.extend(skip)
    else:
        for cell in cells:
            rep, skip = one_cell(cell)
            reports.extend(rep)
            skipped.extend(skip)
    target = out / "moments.csv"
    with open(target, "w") as f:
        moment_lab.reports_to_csv(reports, f, skipped)
    _write_manifest(out, "moments", _config_echo(args), [target])
    n_ok = sum(r.satisfied for r in reports)
    print(f"wrote {target}: {len(reports)} cells ({n_ok} satisfied), {len(skipped)} skipped")
    return 0


def cmd_sweep(args) -> int:
    out = _ensure_out_dir(args)
    cfg = experiments.SweepConfig(
        h_grid=tuple(args.h_grid),
        n_train=args.n_train,
        n_test=args.n_test,
        n_steps=args.n_steps,
        depth_k=args.depth,
        noise_sigma=args.noise_sigma,
        seed=args.seed,
    )
    kind = experiments.PayoffKind(args.payoff, strike=args.strike)
    if args.threads > 1 and len(cfg.h_grid) > 1:
        def one_h(h):
            sub = experiments.SweepConfig(
                h_grid=(h,), n_train=cfg.n_train, n_test=cfg.n_test,
                n_steps=cfg.n_steps, depth_k=cfg.depth_k,
                noise_sigma=cfg.noise_sigma, seed=cfg.seed,
            )
            return experiments.run_hurst_sweep(sub, kind)

        rows = []
        with concurrent.futures.ThreadPoolExecutor(max_workers=args.threads) as pool:
            for chunk in pool.map(one_h, cfg.h_grid):
                rows.extend(chunk)
    else:
        rows = experiments.run_hurst_sweep(cfg, kind)
    target = out / f"sweep_{args.payoff}.csv"
    with open(target, "w") as f:
        experiments.sweep_to_csv(rows, f)
    _write_manifest(out, "sweep", _config_echo(args), [target])
    print(f"wrote {target}: {len(rows)} rows")
    return 0


def cmd_airquality(args) -> int:
    out = _ensure_out_dir(args)
    data_path = args.data or os.environ.get(DATASET_ENV, "")
    if not data_path or not Path(data_path).exists():
        raise DomainError(
            "air-quality dataset file not found: pass --data or set "
            f"${DATASET_ENV} to the published semicolon-delimited CSV"
        )
    frame = airquality.load_air_quality(data_path)
    plan = CvPlan(block_train=args.block_train, block_test=args.block_test)
    res = airquality.run_air_quality(
        frame, depths=args.depths, plan=plan, n_test=args.n_test
    )
    results_file = out / "airquality_results.csv"
    overlay_file = out / "airquality_overlay.csv"
    with open(results_file, "w") as f:
        airquality.results_to_csv(res, f)
    with open(overlay_file, "w") as f:
        airquality.overlay_to_csv(res, f)
    _write_manifest(out, "airquality", _config_echo(args), [results_file, overlay_file])
    for r in res.results:
        label = r.method if r.depth_k == 0 else f"{r.method}_k{r.depth_k}"
        print(f"{label}: train_mse={r.train_mse:.4f} test_mse={r.test_mse:.4f}")
    return 0


def build_parser(suppress_defaults: bool = False) -> argparse.ArgumentParser:
    """CLI parser; with suppress_defaults=True the parsed namespace contains
    only explicitly passed options (used to merge config-file values)."""

    def d(value):
        return argparse.SUPPRESS if suppress_defaults else value

    parser = argparse.ArgumentParser(
        prog="sigfbm",
        description="Signature-feature Lasso regression for fractional Brownian motion",
    )
    parser.add_argument("--threads", type=int, default=d(os.cpu_count() or 1),
                        help="worker threads for independent cells (results are order-independent)")
    parser.add_argument("--config", default=d(""),
                        help="JSON file with per-command defaults; precedence flags > config > defaults (required flags stay required)")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="sample fBm paths to CSV")
    sim.add_argument("--h", type=_positive_hurst, required=True)
    sim.add_argument("--d", type=int, default=d(1))
    sim.add_argument("--n-steps", type=int, default=d(256))
    sim.add_argument("--paths", type=int, default=d(1))
    sim.add_argument("--horizon", type=float, default=d(1.0))
    sim.add_argument("--method", choices=("davies_harte", "cholesky"), default=d("davies_harte"))
    sim.add_argument("--seed", type=int, default=d(0))
    sim.add_argument("--out-dir", default=d("out"))
    sim.set_defaults(func=cmd_simulate)

    sig = sub.add_parser("signature", help="truncated signature of a path CSV")
    sig.add_argument("--in", dest="infile", required=True)
    sig.add_argument("--depth", type=_positive_int, required=True)
    sig.add_argument("--augment", action="store_true")
    sig.add_argument("--out-dir", default=d("out"))
    sig.set_defaults(func=cmd_signature)

    mom = sub.add_parser("moments", help="Monte Carlo signature moments vs bounds")
    mom.add_argument("--regime", choices=(moment_lab.YOUNG, moment_lab.ROUGH), required=True)
    mom.add_argument("--h", type=_positive_hurst, nargs="+", required=True)
    mom.add_argument("--pairs", type=_pair, nargs="+", required=True,
                     help="word-length pairs like 1,1 2,2")
    mom.add_argument("--paths", type=int, default=d(10_000))
    mom.add_argument("--n-steps", type=int, default=d(1024))
    mom.add_argument("--interval", type=float, nargs=2, default=d((0.0, 1.0)))
    mom.add_argument("--seed", type=int, default=d(0))
    mom.add_argument("--out-dir", default=d("out"))
    mom.set_defaults(func=cmd_moments)

    swp = sub.add_parser("sweep", help="payoff regression sweep across H")
    swp.add_argument("--payoff", choices=experiments.PAYOFF_KINDS, required=True)
    swp.add_argument("--h-grid", type=_h_grid, default=d([round(0.1 * i, 1) for i in range(1, 10)]),
                     help="'start:stop:step' or comma-separated values")
    swp.add_argument("--n-train", type=int, default=d(500))
    swp.add_argument("--n-test", type=int, default=d(500))
    swp.add_argument("--n-steps", type=int, default=d(256))
    swp.add_argument("--depth", type=int, default=d(3))
    swp.add_argument("--strike", type=float, default=d(1.2))
    swp.add_argument("--noise-sigma", type=float, default=d(0.0))
    swp.add_argument("--seed", type=int, default=d(0))
    swp.add_argument("--out-dir", default=d("out"))
    swp.set_defaults(func=cmd_sweep)

    air = sub.add_parser("airquality", help="NO2 forecasting comparison")
    air.add_argument("--data", default=d(""), help=f"dataset CSV (or set ${DATASET_ENV})")
    air.add_argument("--depths", type=int, nargs="+", default=d([2, 3]))
    air.add_argument("--block-train", type=int, default=d(900))
    air.add_argument("--block-test", type=int, default=d(100))
    air.add_argument("--n-test", type=int, default=d(250))
    air.add_argument("--out-dir", default=d("out"))
    air.set_defaults(func=cmd_airquality)
    return parser


def _apply_config(args: argparse.Namespace, explicit: argparse.Namespace) -> None:
    """Overlay config-file values onto args for options not passed explicitly."""
    with open(args.config) as f:
        payload = json.load(f)
    if not isinstance(payload, dict):
        raise DomainError(f"{args.config}: config must be a JSON object")
    section = payload.get(args.command, {})
    if not isinstance(section, dict):
        raise DomainError(f"{args.config}: section {args.command!r} must be an object")
    merged = dict(section)
    if "threads" in payload:
        merged["threads"] = payload["threads"]
    explicitly_set = set(vars(explicit))
    for key, value in merged.items():
        if key == "func" or key in explicitly_set:
            continue
        if not hasattr(args, key):
            raise DomainError(f"{args.config}: unknown option {key!r} for {args.command!r}")
        setattr(args, key, value)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.config:
            explicit = build_parser(suppress_defaults=True).parse_args(argv)
            _apply_config(args, explicit)
    except SystemExit as exc:  # argparse uses 2 for usage errors
        return int(exc.code or 0)
    except (DomainError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except (DomainError, OSError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
