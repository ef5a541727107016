"""Monte Carlo moments of fBm signature components versus closed-form bounds.

Estimates E[S_I], E[S_I S_J] over independent fBm paths (signatures of the
piecewise-linear interpolation) and compares them with the regime-specific
upper bounds. Bounds are evaluated in log-space so the 2^(4n) n! factors
cannot overflow. An exact Wick-formula oracle for the discretized estimator
is provided for small total orders.
"""

from __future__ import annotations

import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, TextIO

import numpy as np

from .errors import DomainError, ExactZeroMoment
from .fbm import FbmConfig, HurstLike, hurst_value, sample_fbm_increments
from .tensor_sig import Word, WordLike, as_word, batch_signatures, predictor_count, word_index

YOUNG = "young"
ROUGH = "rough"
BROWNIAN = "brownian"


def regime_of(h: HurstLike) -> str:
    hv = hurst_value(h)
    if hv > 0.5:
        return YOUNG
    if hv < 0.5:
        return ROUGH
    return BROWNIAN


@dataclass(frozen=True)
class BoundSpec:
    """A (regime, word lengths, H, interval) cell for bound evaluation."""

    regime: str
    p: int
    q: int
    h: float
    s: float
    t: float

    def __post_init__(self) -> None:
        hv = hurst_value(self.h)
        if self.regime not in (YOUNG, ROUGH):
            raise DomainError(f"unknown regime {self.regime!r}")
        if self.regime == YOUNG and hv <= 0.5:
            raise DomainError("young regime requires H > 1/2")
        if self.regime == ROUGH:
            if hv >= 0.5:
                raise DomainError("rough regime requires H < 1/2")
            n = self.p + self.q
            if n > math.floor(1.0 / hv):
                raise DomainError(f"rough regime requires p+q <= floor(1/H) = {math.floor(1.0 / hv)}")
            if n % 2 == 0 and n * hv >= 1.0:
                raise DomainError("rough regime requires 2kH < 1 with k = (p+q)/2")
        if not 0 <= self.s < self.t:
            raise DomainError("require 0 <= s < t")


def _check_interval(s: float, t: float) -> None:
    if not 0 <= s < t:
        raise DomainError(f"require 0 <= s < t, got s={s}, t={t}")


def beta_kh(k: int, h: HurstLike) -> float:
    """Constant pi(1/2-H)/cos(pi H) + 1/(1-2kH) of the rough-regime bounds."""
    hv = hurst_value(h)
    if k < 1:
        raise DomainError("k must be a positive integer")
    if hv >= 0.5:
        raise DomainError(f"beta_kh requires H < 1/2, got H={hv}")
    if 2 * k * hv >= 1.0:
        raise DomainError(f"beta_kh requires 2kH < 1, got 2*{k}*{hv} = {2 * k * hv}")
    return math.pi * (0.5 - hv) / math.cos(math.pi * hv) + 1.0 / (1.0 - 2 * k * hv)


def bound_young(p: int, q: int, h: HurstLike, s: float, t: float) -> float:
    """Smooth-regime product bound 2^(2k)/k! (t-s)^(2kH), p+q = 2k."""
    hv = hurst_value(h)
    _check_interval(s, t)
    if hv <= 0.5:
        raise DomainError(f"bound_young requires H > 1/2, got H={hv}")
    if (p + q) % 2 == 1:
        raise ExactZeroMoment("odd total order: the expectation is exactly 0")
    k = (p + q) // 2
    log_val = 2 * k * math.log(2.0) - math.lgamma(k + 1) + 2 * k * hv * math.log(t - s)
    return math.exp(log_val)


def bound_first_moment(n: int, h: HurstLike, s: float, t: float) -> float:
    """Rough-regime first-moment bound beta_{k,H}/(k! H^k) (t-s)^(nH), n = 2k."""
    hv = hurst_value(h)
    _check_interval(s, t)
    if hv >= 0.5:
        raise DomainError(f"bound_first_moment requires H < 1/2, got H={hv}")
    if n < 1:
        raise DomainError("n must be a positive integer")
    if n % 2 == 1:
        raise ExactZeroMoment("odd order: the first moment is exactly 0")
    k = n // 2
    beta = beta_kh(k, hv)
    log_val = (
        math.log(beta) - math.lgamma(k + 1) - k * math.log(hv) + n * hv * math.log(t - s)
    )
    return math.exp(log_val)


def bound_second_moment(n: int, h: HurstLike, s: float, t: float) -> float:
    """Rough-regime bound (2^(4n)/(n! H^n)) (n^2 + 2^(2n) n^5 beta_{n,H}/H^n) (t-s)^(2nH)."""
    hv = hurst_value(h)
    _check_interval(s, t)
    if hv >= 0.5:
        raise DomainError(f"bound_second_moment requires H < 1/2, got H={hv}")
    if n < 1:
        raise DomainError("n must be a positive integer")
    if n > math.floor(1.0 / hv):
        raise DomainError(f"requires n <= floor(1/H) = {math.floor(1.0 / hv)}, got n={n}")
    if 2 * n * hv >= 1.0:
        raise DomainError(f"requires 2nH < 1, got 2*{n}*{hv} = {2 * n * hv}")
    beta = beta_kh(n, hv)
    log_front = 4 * n * math.log(2.0) - math.lgamma(n + 1) - n * math.log(hv)
    log_term1 = 2 * math.log(n)
    log_term2 = 2 * n * math.log(2.0) + 5 * math.log(n) + math.log(beta) - n * math.log(hv)
    log_sum = np.logaddexp(log_term1, log_term2)
    log_val = log_front + log_sum + 2 * n * hv * math.log(t - s)
    return float(math.exp(log_val)) if log_val < 700 else math.inf


def bound_covariance_rough(p: int, q: int, h: HurstLike, s: float, t: float) -> float:
    """Rough-regime product bound 2^n beta_{k,H}/(k! H^k) (t-s)^(2kH), p+q = 2k = n."""
    hv = hurst_value(h)
    _check_interval(s, t)
    if hv >= 0.5:
        raise DomainError(f"bound_covariance_rough requires H < 1/2, got H={hv}")
    if (p + q) % 2 == 1:
        raise ExactZeroMoment("odd total order: the expectation is exactly 0")
    n = p + q
    k = n // 2
    beta = beta_kh(k, hv)
    log_val = (
        n * math.log(2.0)
        + math.log(beta)
        - math.lgamma(k + 1)
        - k * math.log(hv)
        + 2 * k * hv * math.log(t - s)
    )
    return math.exp(log_val)


def product_bound(p: int, q: int, h: HurstLike, s: float, t: float) -> float:
    """Bound for E[S_{I_p} S_{J_q}] in whichever regime h falls.

    Odd p+q maps to the exact-zero case (bound 0). At H = 1/2 no closed-form
    bound applies for even totals; +inf is returned so that `satisfied`
    stays vacuously true.
    """
    hv = hurst_value(h)
    try:
        if hv > 0.5:
            return bound_young(p, q, hv, s, t)
        if hv < 0.5:
            return bound_covariance_rough(p, q, hv, s, t)
    except ExactZeroMoment:
        return 0.0
    if (p + q) % 2 == 1:
        return 0.0
    return math.inf


@dataclass(frozen=True)
class MomentReport:
    """One Monte Carlo estimate next to its theoretical bound."""

    word_i: Word
    word_j: Optional[Word]
    h: float
    interval: tuple[float, float]
    mc_estimate: float
    mc_stderr: float
    n_paths: int
    n_steps: int
    bound: float
    satisfied: bool
    regime: str
    note: str = ""

    def __post_init__(self) -> None:
        expected = bool(self.mc_estimate - 3.0 * self.mc_stderr <= self.bound)
        if self.satisfied != expected:
            raise DomainError("satisfied must equal (estimate - 3*stderr <= bound)")


@dataclass(frozen=True)
class SkippedCell:
    """An infeasible sweep cell, recorded instead of estimated."""

    h: float
    p: int
    q: int
    reason: str


def _alphabet_size(word_i: Word, word_j: Optional[Word]) -> int:
    d = max(word_i.letters) if word_i.letters else 1
    if word_j is not None and word_j.letters:
        d = max(d, max(word_j.letters))
    return d


def _grid_layout(s: float, t: float, n_steps: int) -> tuple[int, int]:
    """Total step count on [0, t] and the index of s, for a spacing of (t-s)/n_steps."""
    dt = (t - s) / n_steps
    n0 = int(round(s / dt))
    if abs(n0 * dt - s) > 1e-9 * max(1.0, s):
        raise DomainError(f"s={s} is not commensurate with the grid spacing {dt}")
    return n0 + n_steps, n0


def mc_moment(
    word_i: WordLike,
    word_j: Optional[WordLike],
    h: HurstLike,
    s: float,
    t: float,
    n_paths: int,
    n_steps: int,
    seed: int,
    method: str = "davies_harte",
    chunk: int = 2048,
) -> MomentReport:
    """Monte Carlo estimate of E[S_{word_i} S_{word_j}] (or E[S_{word_i}]) on [s, t].

    Words are over the raw path alphabet. The estimate averages products of
    truncated-signature components over n_paths independent paths; stderr is
    the sample standard deviation over sqrt(n_paths). The bound column comes
    from the regime-matching bound operation, with 0 for exactly-zero odd
    totals; bound-domain violations propagate.
    """
    hv = hurst_value(h)
    _check_interval(s, t)
    wi = as_word(word_i)
    wj = as_word(word_j) if word_j is not None else None
    if n_paths < 1 or n_steps < 1:
        raise DomainError("n_paths and n_steps must be positive")
    p_len = len(wi)
    q_len = len(wj) if wj is not None else 0
    if wj is not None:
        bound = product_bound(p_len, q_len, hv, s, t)
    else:
        try:
            if hv < 0.5:
                bound = bound_first_moment(p_len, hv, s, t)
            elif p_len % 2 == 1:
                bound = 0.0
            else:
                bound = math.inf
        except ExactZeroMoment:
            bound = 0.0

    d = _alphabet_size(wi, wj)
    depth = max(p_len, q_len, 1)
    n_total, n0 = _grid_layout(s, t, n_steps)
    cfg = FbmConfig(h=hv, d=d, n_steps=n_total, horizon_t=t, method=method, seed=seed)

    offset_i = predictor_count(d, p_len) - d**p_len if p_len > 0 else 0
    col_i = offset_i + word_index(Word(wi.letters, d)) if p_len > 0 else 0
    if wj is not None and q_len > 0:
        offset_j = predictor_count(d, q_len) - d**q_len
        col_j = offset_j + word_index(Word(wj.letters, d))
    else:
        col_j = None

    samples = np.empty(n_paths)
    done = 0
    while done < n_paths:
        take = min(chunk, n_paths - done)
        inc = sample_fbm_increments(cfg, take, first_path_index=done)[:, n0:, :]
        sig = batch_signatures(inc, depth)
        vals = sig[:, col_i]
        if wj is not None:
            vals = vals * (sig[:, col_j] if col_j is not None else 1.0)
        samples[done:done + take] = vals
        done += take

    est = float(np.mean(samples))
    stderr = float(np.std(samples, ddof=1) / math.sqrt(n_paths)) if n_paths > 1 else math.inf
    note = "n_paths < 100: estimate is low-precision" if n_paths < 100 else ""
    return MomentReport(
        word_i=wi,
        word_j=wj,
        h=hv,
        interval=(s, t),
        mc_estimate=est,
        mc_stderr=stderr,
        n_paths=n_paths,
        n_steps=n_steps,
        bound=bound,
        satisfied=bool(est - 3.0 * stderr <= bound),
        regime=regime_of(hv),
        note=note,
    )


def scaling_check(
    word: WordLike,
    h: HurstLike,
    t: float,
    n_paths: int,
    n_steps: int,
    seed: int,
) -> tuple[float, float]:
    """Ratio of E[S_word] over [0, t] to [0, 1]; expected value t^(H |word|).

    Both estimates reuse the same substreams (common random numbers), so the
    t = 1 ratio is exactly 1. The returned stderr treats the two estimates as
    independent, which is conservative under common random numbers.
    """
    w = as_word(word)
    if len(w) % 2 == 1:
        raise DomainError("scaling_check needs an even-length word (odd moments vanish)")
    if t <= 0:
        raise DomainError("t must be positive")
    num = mc_moment(w, None, h, 0.0, t, n_paths, n_steps, seed)
    den = mc_moment(w, None, h, 0.0, 1.0, n_paths, n_steps, seed)
    if abs(den.mc_estimate) < max(5.0 * den.mc_stderr, 1e-300):
        raise DomainError(
            f"denominator estimate {den.mc_estimate:.3e} is not resolved "
            f"(stderr {den.mc_stderr:.3e}); increase n_paths"
        )
    ratio = num.mc_estimate / den.mc_estimate
    rel = math.sqrt(
        (num.mc_stderr / num.mc_estimate) ** 2 + (den.mc_stderr / den.mc_estimate) ** 2
    ) if num.mc_estimate != 0 else math.inf
    return ratio, abs(ratio) * rel


def bound_sweep(
    regime: str,
    h_grid: Sequence[HurstLike],
    order_pairs: Sequence[tuple[int, int]],
    n_paths: int,
    n_steps: int,
    seed: int,
    s: float = 0.0,
    t: float = 1.0,
) -> tuple[list[MomentReport], list[SkippedCell]]:
    """One MomentReport per feasible (H, p, q) cell; infeasible cells are recorded.

    Words are the canonical all-ones words of lengths p and q.
    """
    if regime not in (YOUNG, ROUGH):
        raise DomainError(f"unknown regime {regime!r}")
    reports: list[MomentReport] = []
    skipped: list[SkippedCell] = []
    for h in h_grid:
        hv = hurst_value(h)
        for p, q in order_pairs:
            if regime == YOUNG and hv <= 0.5:
                skipped.append(SkippedCell(hv, p, q, "young regime requires H > 1/2"))
                continue
            if regime == ROUGH and hv >= 0.5:
                skipped.append(SkippedCell(hv, p, q, "rough regime requires H < 1/2"))
                continue
            if regime == ROUGH and (p + q) % 2 == 0 and (p + q) * hv >= 1.0:
                skipped.append(
                    SkippedCell(hv, p, q, f"2kH = {(p + q) * hv:.3f} >= 1: bound constant diverges")
                )
                continue
            wi = Word((1,) * p, 1) if p > 0 else Word((), 1)
            wj = Word((1,) * q, 1) if q > 0 else Word((), 1)
            try:
                reports.append(
                    mc_moment(wi, wj, hv, s, t, n_paths, n_steps, seed)
                )
            except DomainError as exc:
                skipped.append(SkippedCell(hv, p, q, str(exc)))
    return reports, skipped


# --- exact Wick oracle -------------------------------------------------------


def _increment_cov(h: float, times: np.ndarray) -> np.ndarray:
    """Covariance matrix of grid increments of one fBm component."""
    e = 2.0 * h
    a0 = times[:-1]
    a1 = times[1:]

    def cov_pts(x, y):
        return 0.5 * (
            np.abs(x[:, None]) ** e + np.abs(y[None, :]) ** e - np.abs(x[:, None] - y[None, :]) ** e
        )

    return (
        cov_pts(a1, a1) - cov_pts(a1, a0) - cov_pts(a0, a1) + cov_pts(a0, a0)
    )


def _pl_weight_tensor(p: int, m: int) -> np.ndarray:
    """Weights of the piecewise-linear signature as a sum over segment assignments.

    Entry (a_1 <= ... <= a_p) carries weight prod over runs 1/len(run)!, the
    within-segment simplex volume; non-monotone entries are zero.
    """
    w = np.zeros((m,) * p) if p > 0 else np.ones(())
    for combo in itertools.combinations_with_replacement(range(m), p):
        weight = 1.0
        run = 1
        for a, b in zip(combo, combo[1:]):
            if a == b:
                run += 1
            else:
                weight /= math.factorial(run)
                run = 1
        weight /= math.factorial(run)
        w[combo] = weight
    return w


def _pairings(items: tuple[int, ...]):
    if not items:
        yield ()
        return
    first = items[0]
    for r in range(1, len(items)):
        rest = items[1:r] + items[r + 1:]
        for sub in _pairings(rest):
            yield ((first, items[r]),) + sub


def wick_moment(
    word_i: WordLike,
    word_j: Optional[WordLike],
    h: HurstLike,
    s: float,
    t: float,
    n_steps: int,
) -> float:
    """Exact expectation of the discretized estimator behind mc_moment.

    Expands the piecewise-linear signature components on the n_steps grid as
    weighted sums of increment products and takes expectations by summing
    over all pairings of the centered Gaussian increments. Supports total
    word length <= 4 (the pairing count beyond that is impractical); odd
    totals return exactly 0. With n_steps matching mc_moment's grid this is
    the exact mean of the Monte Carlo estimator, bias included.
    """
    hv = hurst_value(h)
    _check_interval(s, t)
    wi = as_word(word_i)
    wj = as_word(word_j) if word_j is not None else None
    letters = wi.letters + (wj.letters if wj is not None else ())
    total = len(letters)
    if total > 4:
        raise DomainError("wick_moment supports total word length <= 4")
    if total % 2 == 1:
        return 0.0
    if total == 0:
        return 1.0
    m = n_steps
    times = np.linspace(s, t, m + 1)
    cov = _increment_cov(hv, times)
    p_len = len(wi)
    q_len = len(wj) if wj is not None else 0

    w_i = _pl_weight_tensor(p_len, m)
    operands_base = []
    subscripts = []
    names = "abcd"
    pos_axis = {k: names[k] for k in range(total)}
    if p_len > 0:
        operands_base.append(w_i)
        subscripts.append("".join(pos_axis[k] for k in range(p_len)))
    if q_len > 0:
        w_j = _pl_weight_tensor(q_len, m)
        operands_base.append(w_j)
        subscripts.append("".join(pos_axis[k] for k in range(p_len, total)))

    result = 0.0
    for pairing in _pairings(tuple(range(total))):
        if any(letters[a] != letters[b] for a, b in pairing):
            continue
        ops = list(operands_base)
        subs = list(subscripts)
        for a, b in pairing:
            ops.append(cov)
            subs.append(pos_axis[a] + pos_axis[b])
        expr = ",".join(subs) + "->"
        result += float(np.einsum(expr, *ops, optimize=True))
    return result


# --- serialization ----------------------------------------------------------

REPORT_COLUMNS = "regime,H,word_i,word_j,s,t,n_paths,n_steps,estimate,stderr,bound,satisfied"


def reports_to_csv(
    reports: Sequence[MomentReport],
    out: TextIO,
    skipped: Sequence[SkippedCell] = (),
) -> None:
    """Write the report CSV; infeasible cells become recorded-skip rows."""
    out.write(REPORT_COLUMNS + "\n")
    for r in reports:
        wj = r.word_j.label() if r.word_j is not None else ""
        out.write(
            f"{r.regime},{format(r.h, '.17g')},{r.word_i.label()},{wj},"
            f"{format(r.interval[0], '.17g')},{format(r.interval[1], '.17g')},"
            f"{r.n_paths},{r.n_steps},{format(r.mc_estimate, '.17g')},"
            f"{format(r.mc_stderr, '.17g')},{format(r.bound, '.17g')},{str(r.satisfied).lower()}\n"
        )
    for cell in skipped:
        reg = regime_of(cell.h)
        wi = ".".join(["1"] * cell.p)
        wj = ".".join(["1"] * cell.q)
        out.write(
            f"{reg},{format(cell.h, '.17g')},{wi},{wj},,,,,,,,skipped: {cell.reason}\n"
        )


def reports_to_csv_string(
    reports: Sequence[MomentReport], skipped: Sequence[SkippedCell] = ()
) -> str:
    buf = io.StringIO()
    reports_to_csv(reports, buf, skipped)
    return buf.getvalue()
