"""Signature design matrices and L1-penalized regression by coordinate descent.

The objective is sum_n (y_n - X beta)^2 + lambda * ||beta||_1 with the
intercept column unpenalized. Internally y is centered and penalized columns
are centered and scaled to unit variance (signature components span wildly
different magnitudes across levels); reported coefficients are mapped back
to the original feature scale.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, TextIO, Union

import numpy as np

from .errors import DomainError
from .fbm import MultiPath
from .tensor_sig import Word, all_words, batch_signatures, predictor_count, time_augment


@dataclass(frozen=True)
class DesignMatrix:
    """Feature matrix whose columns are signature components keyed by words."""

    entries: np.ndarray
    column_words: Optional[tuple[Word, ...]] = None
    column_scales: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        x = np.ascontiguousarray(self.entries, dtype=float)
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise DomainError("design matrix must be 2-d and non-empty")
        if not np.all(np.isfinite(x)):
            raise DomainError("design matrix contains non-finite entries")
        if not np.all(x[:, 0] == 1.0):
            raise DomainError("column 0 must be the constant 1 (order-0 component)")
        if self.column_words is not None:
            words = tuple(self.column_words)
            if len(words) != x.shape[1]:
                raise DomainError("column_words length must match column count")
            if len(words[0]) != 0:
                raise DomainError("column 0 must be keyed by the empty word")
            if len(set(w.letters for w in words)) != len(words):
                raise DomainError("column_words contains duplicates")
            keys = [(len(w), w.letters) for w in words]
            if keys != sorted(keys):
                raise DomainError("column_words must be ordered level-then-lexicographic")
            object.__setattr__(self, "column_words", words)
        x.setflags(write=False)
        object.__setattr__(self, "entries", x)

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape


DesignLike = Union[DesignMatrix, np.ndarray]


def _entries(x: DesignLike) -> np.ndarray:
    return x.entries if isinstance(x, DesignMatrix) else np.asarray(x, dtype=float)


def build_design(
    paths: Sequence[MultiPath], depth_k: int, augment: bool
) -> DesignMatrix:
    """Row n = truncated signature of (optionally time-augmented) path n."""
    if depth_k < 1:
        raise DomainError("depth_k must be >= 1")
    if not paths:
        raise DomainError("need at least one path")
    dims = {p.d for p in paths}
    if len(dims) != 1:
        raise DomainError(f"paths have inconsistent dimensions: {sorted(dims)}")
    used = [time_augment(p) for p in paths] if augment else list(paths)
    d = used[0].d
    lengths = {p.n for p in used}
    if len(lengths) == 1:
        inc = np.stack([p.increments() for p in used])
        rows = batch_signatures(inc, depth_k)
    else:
        rows = np.vstack([batch_signatures(p.increments()[None], depth_k) for p in used])
    words = tuple(w for k in range(depth_k + 1) for w in all_words(d, k))
    return DesignMatrix(entries=rows, column_words=words)


def soft_threshold(z: float, gamma: float) -> float:
    """sign(z) * max(|z| - gamma, 0)."""
    if gamma < 0:
        raise DomainError("gamma must be nonnegative")
    return math.copysign(max(abs(z) - gamma, 0.0), z)


@dataclass(frozen=True)
class LassoFit:
    """Fitted coefficients on the original feature scale, intercept at index 0."""

    coefficients: np.ndarray
    lam: float
    n_iterations: int
    final_objective: float
    converged: bool
    column_words: Optional[tuple[Word, ...]] = None

    @property
    def intercept(self) -> float:
        return float(self.coefficients[0])


def lasso_objective(x: DesignLike, y: np.ndarray, coefficients: np.ndarray, lam: float) -> float:
    """sum of squared residuals + lam * l1-norm of the non-intercept coefficients."""
    X = _entries(x)
    r = np.asarray(y, float) - X @ coefficients
    return float(r @ r + lam * np.abs(coefficients[1:]).sum())


@dataclass
class _Standardized:
    xs: np.ndarray
    yc: np.ndarray
    mu: np.ndarray
    sd: np.ndarray
    active: np.ndarray
    y_mean: float


def _standardize(X: np.ndarray, y: np.ndarray) -> _Standardized:
    xp = X[:, 1:]
    mu = xp.mean(axis=0)
    sd = xp.std(axis=0)
    active = sd > 0
    safe_sd = np.where(active, sd, 1.0)
    xs = (xp - mu) / safe_sd
    y_mean = float(y.mean())
    return _Standardized(xs=xs, yc=y - y_mean, mu=mu, sd=safe_sd, active=active, y_mean=y_mean)


def lambda_max(x: DesignLike, y: np.ndarray) -> float:
    """Smallest lambda at which every penalized coefficient is exactly 0."""
    X = _entries(x)
    std = _standardize(X, np.asarray(y, float))
    if not std.active.any():
        return 0.0
    return float(2.0 * np.abs(std.xs.T @ std.yc)[std.active].max())


def default_lambda_grid(x: DesignLike, y: np.ndarray, n: int = 50, ratio: float = 1e-4) -> np.ndarray:
    """Decreasing log-spaced grid from lambda_max down to ratio * lambda_max."""
    lmax = lambda_max(x, y)
    if lmax <= 0:
        return np.zeros(1)
    return np.exp(np.linspace(math.log(lmax), math.log(lmax * ratio), n))


def _cd_cycle(beta, xs_gram, c, lam, active_idx):
    """One cyclic pass; returns max absolute coefficient change."""
    max_delta = 0.0
    for j in active_idx:
        old = beta[j]
        gjj = xs_gram[j, j]
        rho = c[j] - xs_gram[j] @ beta + gjj * old
        new = soft_threshold(rho, lam / 2.0) / gjj
        if new != old:
            beta[j] = new
            delta = abs(new - old)
            if delta > max_delta:
                max_delta = delta
    return max_delta


def lasso_fit(
    x: DesignLike,
    y: Sequence[float],
    lam: float,
    max_iter: int = 100_000,
    tol: float = 1e-7,
    warm_start: Optional[np.ndarray] = None,
) -> LassoFit:
    """Cyclic coordinate descent on the penalized least-squares objective.

    The internal objective (on centered/scaled columns) is non-increasing per
    full cycle; convergence means the max absolute standardized-coefficient
    change fell below tol. Returns coefficients on the original scale with
    the intercept first. Hitting max_iter sets converged=False, no exception.
    """
    X = _entries(x)
    y = np.asarray(y, dtype=float)
    if lam < 0:
        raise DomainError("lambda must be nonnegative")
    if X.ndim != 2 or X.shape[0] != y.shape[0] or y.ndim != 1 or y.size < 1:
        raise DomainError(f"shape mismatch: X {X.shape}, y {y.shape}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DomainError("non-finite entries in X or y")
    if not np.all(X[:, 0] == 1.0):
        raise DomainError("column 0 must be the constant intercept column")

    n_cols = X.shape[1]
    std = _standardize(X, y)
    p = n_cols - 1
    beta = np.zeros(p)
    if warm_start is not None:
        beta[:] = warm_start
        beta[~std.active] = 0.0
    active_idx = np.flatnonzero(std.active)

    gram = std.xs.T @ std.xs
    c = std.xs.T @ std.yc
    yty = float(std.yc @ std.yc)

    def objective(b):
        nz = np.flatnonzero(b)
        if nz.size == 0:
            return yty
        bn = b[nz]
        return (
            yty
            - 2.0 * float(c[nz] @ bn)
            + float(bn @ gram[np.ix_(nz, nz)] @ bn)
            + lam * np.abs(bn).sum()
        )

    prev_obj = objective(beta)
    n_iterations = 0
    converged = False
    while n_iterations < max_iter:
        # Full pass over every coordinate; convergence is only declared here,
        # so the KKT conditions hold across the whole design at exit.
        n_iterations += 1
        max_delta = _cd_cycle(beta, gram, c, lam, active_idx)
        obj = objective(beta)
        if obj > prev_obj + 1e-10 * (1.0 + abs(prev_obj)):
            raise RuntimeError(
                f"objective increased within a coordinate-descent cycle "
                f"({prev_obj!r} -> {obj!r}); this indicates corrupted inputs"
            )
        prev_obj = obj
        if max_delta < tol:
            converged = True
            break
        # Iterate on the current support until it stabilizes (cheap dense
        # cycles on the sub-Gram), then return to a full pass to admit new
        # coordinates. Coordinates outside the support hold exactly 0, so the
        # subproblem objective equals the full objective.
        support = active_idx[beta[active_idx] != 0.0]
        if support.size:
            sub_gram = gram[np.ix_(support, support)]
            sub_c = c[support]
            sub_beta = beta[support].copy()
            sub_all = np.arange(support.size)
            while n_iterations < max_iter:
                n_iterations += 1
                inner_delta = _cd_cycle(sub_beta, sub_gram, sub_c, lam, sub_all)
                obj = (
                    yty
                    - 2.0 * float(sub_c @ sub_beta)
                    + float(sub_beta @ sub_gram @ sub_beta)
                    + lam * np.abs(sub_beta).sum()
                )
                if obj > prev_obj + 1e-10 * (1.0 + abs(prev_obj)):
                    raise RuntimeError(
                        f"objective increased within a coordinate-descent cycle "
                        f"({prev_obj!r} -> {obj!r}); this indicates corrupted inputs"
                    )
                prev_obj = obj
                if inner_delta < tol:
                    break
            beta[support] = sub_beta

    coef = np.zeros(n_cols)
    coef[1:] = np.where(std.active, beta / std.sd, 0.0)
    coef[0] = std.y_mean - float(std.mu @ coef[1:])
    words = x.column_words if isinstance(x, DesignMatrix) else None
    return LassoFit(
        coefficients=coef,
        lam=lam,
        n_iterations=n_iterations,
        final_objective=lasso_objective(X, y, coef, lam),
        converged=converged,
        column_words=words,
    )


def kkt_residuals(
    x: DesignLike, y: np.ndarray, fit: LassoFit
) -> tuple[np.ndarray, np.ndarray]:
    """Stationarity diagnostics on the standardized scale.

    Returns (nonzero_residuals, zero_excess): |2 x_j . r + lam sign(beta_j)|
    for active coordinates (r = X beta - y, standardized columns) and
    max(|2 x_j . r| - lam, 0) for inactive ones.
    """
    X = _entries(x)
    y = np.asarray(y, float)
    std = _standardize(X, y)
    beta_std = fit.coefficients[1:] * std.sd
    r = std.xs @ beta_std - (y - y.mean())
    grad = 2.0 * (std.xs.T @ r)
    nz = np.abs(beta_std) > 0
    nonzero_res = np.abs(grad[nz] + fit.lam * np.sign(beta_std[nz]))
    zero_excess = np.maximum(np.abs(grad[~nz & std.active]) - fit.lam, 0.0)
    return nonzero_res, zero_excess


def predict(fit: LassoFit, x: DesignLike) -> np.ndarray:
    """X beta-hat, intercept included."""
    X = _entries(x)
    if isinstance(x, DesignMatrix) and fit.column_words is not None:
        if x.column_words is not None and x.column_words != fit.column_words:
            raise DomainError("design matrix columns do not match the fitted words")
    if X.shape[1] != fit.coefficients.size:
        raise DomainError(
            f"design has {X.shape[1]} columns, fit expects {fit.coefficients.size}"
        )
    return X @ fit.coefficients


def mse(pred: Sequence[float], truth: Sequence[float]) -> float:
    """Mean squared difference."""
    p = np.asarray(pred, float)
    t = np.asarray(truth, float)
    if p.shape != t.shape or p.size < 1:
        raise DomainError(f"length mismatch: {p.shape} vs {t.shape}")
    return float(np.mean((p - t) ** 2))


@dataclass(frozen=True)
class CvPlan:
    """Chronological cross-validation: contiguous train blocks, then test blocks."""

    block_train: int
    block_test: int
    lambda_grid: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if self.block_train < 1 or self.block_test < 1:
            raise DomainError("block sizes must be positive")
        if self.lambda_grid is not None:
            grid = np.asarray(self.lambda_grid, float)
            if grid.ndim != 1 or grid.size < 1 or np.any(grid < 0):
                raise DomainError("lambda_grid must be 1-d and nonnegative")
            if grid.size > 1 and not np.all(np.diff(grid) < 0):
                raise DomainError("lambda_grid must be strictly decreasing")
            object.__setattr__(self, "lambda_grid", grid)

    def blocks(self, n_rows: int) -> list[tuple[np.ndarray, np.ndarray]]:
        size = self.block_train + self.block_test
        out = []
        for start in range(0, n_rows - size + 1, size):
            train = np.arange(start, start + self.block_train)
            test = np.arange(start + self.block_train, start + size)
            out.append((train, test))
        return out


@dataclass(frozen=True)
class CvCell:
    lam: float
    block: int
    train_mse: float
    test_mse: float


def cv_fit(
    x: DesignLike,
    y: Sequence[float],
    plan: CvPlan,
    tie_stderr: float = 1.0,
    max_iter: int = 1000,
    tol: float = 1e-5,
) -> tuple[float, list[CvCell]]:
    """Average test MSE per lambda over chronological blocks; smallest wins.

    Ties break toward larger lambda (sparser model): every lambda whose mean
    test MSE lies within tie_stderr standard errors of the minimum (standard
    error of the winning cell's mean across blocks) counts as tied, and the
    largest tied lambda is returned. With a single block the standard error
    is 0 and the rule reduces to the exact argmin.

    Path fits use the looser (max_iter, tol) defaults here: cross-validation
    only needs MSE estimates, and full-precision solves stall on the
    near-singular small-lambda end of collinear designs. Final fits should
    use lasso_fit's own defaults.
    """
    X = _entries(x)
    y = np.asarray(y, float)
    blocks = plan.blocks(X.shape[0])
    if not blocks:
        raise DomainError(
            f"{X.shape[0]} rows cannot host one {plan.block_train}+{plan.block_test} block"
        )
    if tie_stderr < 0:
        raise DomainError("tie_stderr must be nonnegative")
    grid = plan.lambda_grid
    if grid is None:
        grid = default_lambda_grid(X, y)
    cells: list[CvCell] = []
    per_block = np.zeros((len(blocks), len(grid)))
    for b, (tr, te) in enumerate(blocks):
        warm = None
        block_sd = _standardize(X[tr], y[tr]).sd
        for li, lam in enumerate(grid):
            fit = lasso_fit(X[tr], y[tr], lam, max_iter=max_iter, tol=tol, warm_start=warm)
            warm = fit.coefficients[1:] * block_sd
            cell = CvCell(
                lam=float(lam),
                block=b,
                train_mse=mse(predict(fit, X[tr]), y[tr]),
                test_mse=mse(predict(fit, X[te]), y[te]),
            )
            cells.append(cell)
            per_block[b, li] = cell.test_mse
    mean_test = per_block.mean(axis=0)
    best_idx = int(np.argmin(mean_test))
    if len(blocks) > 1 and tie_stderr > 0:
        se = float(per_block[:, best_idx].std(ddof=1) / math.sqrt(len(blocks)))
        threshold = mean_test[best_idx] + tie_stderr * se
        for li in range(len(grid)):  # grid is decreasing: first hit = largest lambda
            if mean_test[li] <= threshold:
                best_idx = li
                break
    return float(grid[best_idx]), cells


# --- serialization ----------------------------------------------------------


def fit_to_json(fit: LassoFit) -> str:
    """Fit export: {lambda, intercept, coefficients: [{word, value}], ...}."""
    coeffs = []
    for j in range(1, fit.coefficients.size):
        if fit.column_words is not None:
            key = fit.column_words[j].label()
        else:
            key = str(j)
        coeffs.append({"word": key, "value": float(fit.coefficients[j])})
    payload = {
        "lambda": fit.lam,
        "intercept": fit.intercept,
        "coefficients": coeffs,
        "converged": fit.converged,
        "n_iterations": fit.n_iterations,
        "objective": fit.final_objective,
    }
    return json.dumps(payload, indent=2, sort_keys=True)


def cv_to_csv(cells: Sequence[CvCell], out: TextIO) -> None:
    out.write("lambda,block,train_mse,test_mse\n")
    for c in cells:
        out.write(
            f"{format(c.lam, '.17g')},{c.block},"
            f"{format(c.train_mse, '.17g')},{format(c.test_mse, '.17g')}\n"
        )


def cv_to_csv_string(cells: Sequence[CvCell]) -> str:
    buf = io.StringIO()
    cv_to_csv(cells, buf)
    return buf.getvalue()
