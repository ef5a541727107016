"""Synthetic option-payoff study: baseline Lasso vs signature Lasso across H.

Price paths are fBm shifted to start at 1 (so the 1.2 strike binds), time to
maturity T = 1. The baseline featurizes a path by its raw grid samples; the
signature route uses the truncated signature of the time-augmented path.
Both are tuned by chronological cross-validation on the training paths.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, TextIO

import numpy as np

from .errors import DomainError
from .fbm import FbmConfig, HurstLike, MultiPath, hurst_value, sample_fbm_increments
from .siglasso import (
    CvPlan,
    DesignMatrix,
    cv_fit,
    lasso_fit,
    mse,
    predict,
)
from .tensor_sig import all_words, batch_signatures

PAYOFF_KINDS = ("call", "asian", "rainbow1", "rainbow2")
BASELINE = "lasso"
SIGNATURE = "signature_lasso"


@dataclass(frozen=True)
class PayoffKind:
    """One of the four option payoffs; call/asian need d=1, rainbows d=2."""

    kind: str
    strike: float = 1.2

    def __post_init__(self) -> None:
        if self.kind not in PAYOFF_KINDS:
            raise DomainError(f"unknown payoff kind {self.kind!r}; choose from {PAYOFF_KINDS}")

    @property
    def dimension(self) -> int:
        return 1 if self.kind in ("call", "asian") else 2


def payoff(path: MultiPath, p: PayoffKind) -> float:
    """Evaluate the payoff on one price path."""
    if path.d != p.dimension:
        raise DomainError(f"payoff {p.kind!r} needs d={p.dimension}, path has d={path.d}")
    if p.kind == "call":
        return max(path.values[0, -1] - p.strike, 0.0)
    if p.kind == "asian":
        return max(float(np.mean(path.values[0])) - p.strike, 0.0)
    if p.kind == "rainbow1":
        return max(path.values[0, -1] - path.values[1, -1], 0.0)
    return max(max(path.values[0, -1], path.values[1, -1]) - p.strike, 0.0)


def make_price_paths(
    h: HurstLike,
    d: int,
    n_paths: int,
    n_steps: int,
    seed: int,
    first_path_index: int = 0,
) -> list[MultiPath]:
    """Price paths 1 + B_t on [0, 1] with independent components."""
    cfg = FbmConfig(h=h, d=d, n_steps=n_steps, horizon_t=1.0, seed=seed)
    inc = sample_fbm_increments(cfg, n_paths, first_path_index=first_path_index)
    times = np.linspace(0.0, 1.0, n_steps + 1)
    paths = []
    for p in range(n_paths):
        values = np.ones((d, n_steps + 1))
        values[:, 1:] += np.cumsum(inc[p], axis=0).T
        paths.append(MultiPath(times, values))
    return paths


@dataclass(frozen=True)
class SweepConfig:
    """Hurst-sweep settings; defaults match the synthetic study."""

    h_grid: tuple[float, ...] = tuple(round(0.1 * i, 1) for i in range(1, 10))
    n_train: int = 500
    n_test: int = 500
    n_steps: int = 256
    depth_k: int = 3
    noise_sigma: float = 0.0
    seed: int = 0
    baseline: str = "lasso_on_samples"

    def __post_init__(self) -> None:
        for h in self.h_grid:
            hurst_value(h)
        if self.n_train < 2 or self.n_test < 1:
            raise DomainError("need n_train >= 2 and n_test >= 1")
        if self.depth_k < 1:
            raise DomainError("depth_k must be >= 1")
        if self.noise_sigma < 0:
            raise DomainError("noise_sigma must be nonnegative")
        if self.baseline != "lasso_on_samples":
            raise DomainError(f"unknown baseline {self.baseline!r}")


@dataclass(frozen=True)
class SweepRow:
    payoff: str
    h: float
    seed: int
    method: str
    depth_k: int
    lam: float
    train_mse: float
    test_mse: float
    n_train: int
    n_test: int
    n_steps: int


def _raw_design(paths: Sequence[MultiPath]) -> np.ndarray:
    """Intercept column plus every grid sample of every component."""
    rows = np.stack([p.values.reshape(-1) for p in paths])
    return np.column_stack([np.ones(len(paths)), rows])


def _signature_design(paths: Sequence[MultiPath], depth_k: int) -> np.ndarray:
    """Flattened signatures of the time-augmented paths."""
    inc = np.stack(
        [np.diff(np.vstack([p.times[None, :], p.values]), axis=1).T for p in paths]
    )
    return batch_signatures(inc, depth_k)


def _default_plan(n_train: int) -> CvPlan:
    """Single chronological block covering the training paths, 80/20."""
    block_train = max(int(0.8 * n_train), 1)
    block_test = max(n_train - block_train, 1)
    return CvPlan(block_train=block_train, block_test=block_test)


def _fit_method(x_train, y_train, x_test, y_test, plan) -> tuple[float, float, float]:
    best_lam, _cells = cv_fit(x_train, y_train, plan)
    fit = lasso_fit(x_train, y_train, best_lam)
    return (
        best_lam,
        mse(predict(fit, x_train), y_train),
        mse(predict(fit, x_test), y_test),
    )


def run_hurst_sweep(
    cfg: SweepConfig, p: PayoffKind, plan: Optional[CvPlan] = None
) -> list[SweepRow]:
    """Fit both methods at every H on the grid; two rows per H."""
    rows: list[SweepRow] = []
    d = p.dimension
    for h_idx, h in enumerate(cfg.h_grid):
        paths = make_price_paths(h, d, cfg.n_train + cfg.n_test, cfg.n_steps, cfg.seed)
        train, test = paths[: cfg.n_train], paths[cfg.n_train:]
        y_train = np.array([payoff(q, p) for q in train])
        y_test = np.array([payoff(q, p) for q in test])
        if cfg.noise_sigma > 0:
            noise_rng = np.random.Generator(
                np.random.Philox(
                    np.random.SeedSequence(entropy=cfg.seed, spawn_key=(2**31, h_idx))
                )
            )
            y_train = y_train + cfg.noise_sigma * noise_rng.standard_normal(cfg.n_train)
            y_test = y_test + cfg.noise_sigma * noise_rng.standard_normal(cfg.n_test)
        cv_plan = plan if plan is not None else _default_plan(cfg.n_train)

        lam_b, tr_b, te_b = _fit_method(
            _raw_design(train), y_train, _raw_design(test), y_test, cv_plan
        )
        rows.append(
            SweepRow(p.kind, hurst_value(h), cfg.seed, BASELINE, 0, lam_b, tr_b, te_b,
                     cfg.n_train, cfg.n_test, cfg.n_steps)
        )
        lam_s, tr_s, te_s = _fit_method(
            _signature_design(train, cfg.depth_k),
            y_train,
            _signature_design(test, cfg.depth_k),
            y_test,
            cv_plan,
        )
        rows.append(
            SweepRow(p.kind, hurst_value(h), cfg.seed, SIGNATURE, cfg.depth_k, lam_s,
                     tr_s, te_s, cfg.n_train, cfg.n_test, cfg.n_steps)
        )
    return rows


SWEEP_COLUMNS = "payoff,H,seed,method,depth_k,lambda,train_mse,test_mse,n_train,n_test,n_steps"


def sweep_to_csv(rows: Sequence[SweepRow], out: TextIO) -> None:
    out.write(SWEEP_COLUMNS + "\n")
    for r in rows:
        out.write(
            f"{r.payoff},{format(r.h, '.17g')},{r.seed},{r.method},{r.depth_k},"
            f"{format(r.lam, '.17g')},{format(r.train_mse, '.17g')},"
            f"{format(r.test_mse, '.17g')},{r.n_train},{r.n_test},{r.n_steps}\n"
        )


def sweep_to_csv_string(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    sweep_to_csv(rows, buf)
    return buf.getvalue()
