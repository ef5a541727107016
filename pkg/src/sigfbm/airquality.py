"""UCI Air Quality forecasting: NO2 one hour ahead from 168-hour windows.

The dataset's CSV is semicolon-delimited with decimal commas and marks
missing cells with the sentinel -200. Windows carry the previous 168 hours
of (NO2, temperature, relative humidity); any window touching a masked cell
or an hourly gap is dropped rather than imputed. Channel standardization
constants come from the training range only, and the cross-validation plan
is strictly chronological, so no statistic sees future data.
"""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, TextIO, Union

import numpy as np

from .errors import DomainError
from .fbm import MultiPath
from .siglasso import CvPlan, cv_fit, lasso_fit, mse, predict
from .tensor_sig import batch_signatures, predictor_count

SENTINEL = -200.0
HOUR = 3600.0
CHANNELS = ("no2", "temperature", "humidity")
BASELINE = "lasso"
SIGNATURE = "signature_lasso"


@dataclass(frozen=True)
class AirQualityFrame:
    """Hourly NO2 / temperature / relative-humidity series with validity masks."""

    timestamps: np.ndarray  # seconds since epoch, strictly increasing
    no2: np.ndarray
    temperature: np.ndarray
    humidity: np.ndarray
    validity_mask: np.ndarray  # (n, 3) bools, column order = CHANNELS
    diagnostics: tuple[str, ...] = ()
    # derived in __post_init__: indices i with timestamps[i+1]-timestamps[i] != 1h
    gaps: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        ts = np.asarray(self.timestamps, float)
        if ts.ndim != 1 or not np.all(np.diff(ts) > 0):
            raise DomainError("timestamps must be 1-d and strictly increasing")
        n = ts.size
        for name in ("no2", "temperature", "humidity"):
            if getattr(self, name).shape != (n,):
                raise DomainError(f"{name} must have shape ({n},)")
        if self.validity_mask.shape != (n, 3):
            raise DomainError(f"validity_mask must have shape ({n}, 3)")
        gaps = tuple(int(i) for i in np.flatnonzero(np.abs(np.diff(ts) - HOUR) > 1e-6))
        object.__setattr__(self, "gaps", gaps)

    @property
    def n_hours(self) -> int:
        return self.timestamps.size

    def channel_matrix(self) -> np.ndarray:
        """(3, n) matrix in CHANNELS order."""
        return np.vstack([self.no2, self.temperature, self.humidity])

    def content_hash(self) -> str:
        digest = hashlib.sha256()
        for arr in (self.timestamps, self.no2, self.temperature, self.humidity):
            digest.update(np.ascontiguousarray(arr, float).tobytes())
        digest.update(np.ascontiguousarray(self.validity_mask, bool).tobytes())
        return digest.hexdigest()


def _parse_decimal(token: str) -> float:
    return float(token.strip().replace(",", "."))


def _parse_timestamp(date_token: str, time_token: str) -> float:
    day, month, year = date_token.strip().split("/")
    hour = time_token.strip().split(".")[0]
    stamp = dt.datetime(int(year), int(month), int(day), int(hour), tzinfo=dt.timezone.utc)
    return stamp.timestamp()


def load_air_quality(path: str) -> AirQualityFrame:
    """Parse the published semicolon-delimited CSV (decimal commas, -200 sentinel).

    Selects NO2(GT), T, and RH. Malformed rows are skipped with a per-row
    diagnostic; sentinel cells are masked rather than dropped.
    """
    with open(path, newline="", encoding="utf-8", errors="replace") as f:
        reader = csv.reader(f, delimiter=";")
        try:
            header = next(reader)
        except StopIteration:
            raise DomainError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        try:
            cols = {
                "date": header.index("Date"),
                "time": header.index("Time"),
                "no2": header.index("NO2(GT)"),
                "temperature": header.index("T"),
                "humidity": header.index("RH"),
            }
        except ValueError as exc:
            raise DomainError(f"{path}: missing expected column ({exc})") from None

        timestamps: list[float] = []
        data: dict[str, list[float]] = {name: [] for name in CHANNELS}
        mask_rows: list[list[bool]] = []
        diagnostics: list[str] = []
        last_ts = -math.inf
        for i, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                ts = _parse_timestamp(row[cols["date"]], row[cols["time"]])
                cells = {name: _parse_decimal(row[cols[name]]) for name in CHANNELS}
            except (ValueError, IndexError) as exc:
                diagnostics.append(f"row {i}: skipped ({exc})")
                continue
            if ts <= last_ts:
                diagnostics.append(f"row {i}: skipped (timestamp not increasing)")
                continue
            last_ts = ts
            timestamps.append(ts)
            valid = []
            for name in CHANNELS:
                v = cells[name]
                ok = v != SENTINEL and math.isfinite(v)
                valid.append(ok)
                data[name].append(v if ok else math.nan)
            mask_rows.append(valid)

    if len(timestamps) < 2:
        raise DomainError(f"{path}: fewer than 2 usable rows")
    return AirQualityFrame(
        timestamps=np.asarray(timestamps),
        no2=np.asarray(data["no2"]),
        temperature=np.asarray(data["temperature"]),
        humidity=np.asarray(data["humidity"]),
        validity_mask=np.asarray(mask_rows, dtype=bool),
        diagnostics=tuple(diagnostics),
    )


@dataclass(frozen=True)
class WindowedDataset:
    """Sliding 168-hour windows with one-hour-ahead NO2 targets.

    Window n covers hours [n-168, n-1]; its target is NO2 at hour n. The
    channel means/stds are computed from hours strictly before the first
    test target (training range only).
    """

    windows: np.ndarray  # (N, 3, window_len) raw channel values
    targets: np.ndarray  # (N,)
    target_times: np.ndarray  # (N,)
    window_len: int
    n_train: int
    channel_means: np.ndarray  # (3,)
    channel_stds: np.ndarray  # (3,)

    @property
    def n_windows(self) -> int:
        return self.targets.size

    def standardized_windows(self) -> np.ndarray:
        return (self.windows - self.channel_means[None, :, None]) / self.channel_stds[
            None, :, None
        ]

    def window_paths(self, standardized: bool = True) -> list[MultiPath]:
        """Windows as MultiPath values on a window-local [0, 1] time grid."""
        times = np.linspace(0.0, 1.0, self.window_len)
        values = self.standardized_windows() if standardized else self.windows
        return [MultiPath(times, values[i]) for i in range(self.n_windows)]


def make_windows(
    frame: AirQualityFrame,
    window_len: int = 168,
    horizon: int = 1,
    n_test: int = 250,
) -> WindowedDataset:
    """Chronological overlap-allowed windows; anything touching a masked cell
    or an hourly gap is dropped."""
    if window_len < 2 or horizon != 1:
        raise DomainError("window_len must be >= 2 and horizon must be 1 hour")
    n = frame.n_hours
    if n < window_len + horizon:
        raise DomainError(
            f"need at least {window_len + horizon} contiguous valid hours, have {n} rows"
        )
    # run ids split the series at hourly gaps; a window must stay inside one run
    run_id = np.zeros(n, dtype=int)
    for g in frame.gaps:
        run_id[g + 1:] += 1
    all_valid = frame.validity_mask.all(axis=1)
    # prefix sums for O(1) "all hours valid in [a, b)" queries
    valid_prefix = np.concatenate([[0], np.cumsum(all_valid)])

    channels = frame.channel_matrix()
    win_list: list[np.ndarray] = []
    targets: list[float] = []
    target_times: list[float] = []
    for t_idx in range(window_len, n):
        a = t_idx - window_len
        if run_id[a] != run_id[t_idx]:
            continue
        if valid_prefix[t_idx] - valid_prefix[a] != window_len:
            continue
        if not frame.validity_mask[t_idx, 0]:  # target NO2 must exist
            continue
        win_list.append(channels[:, a:t_idx])
        targets.append(frame.no2[t_idx])
        target_times.append(frame.timestamps[t_idx])
    if not win_list:
        raise DomainError(
            f"no usable window: need {window_len + horizon} contiguous valid hours"
        )
    windows = np.stack(win_list)
    targets_arr = np.asarray(targets)
    times_arr = np.asarray(target_times)

    n_windows = targets_arr.size
    if n_test >= n_windows:
        raise DomainError(
            f"n_test={n_test} leaves no training windows (have {n_windows})"
        )
    n_train = n_windows - n_test
    first_test_time = times_arr[n_train]
    train_hours = frame.timestamps < first_test_time
    means = np.empty(3)
    stds = np.empty(3)
    for c in range(3):
        ok = train_hours & frame.validity_mask[:, c]
        vals = channels[c, ok]
        if vals.size < 2:
            raise DomainError("training range too short to standardize channels")
        means[c] = vals.mean()
        stds[c] = vals.std()
        if stds[c] == 0:
            stds[c] = 1.0
    return WindowedDataset(
        windows=windows,
        targets=targets_arr,
        target_times=times_arr,
        window_len=window_len,
        n_train=n_train,
        channel_means=means,
        channel_stds=stds,
    )


@dataclass(frozen=True)
class MethodResult:
    method: str
    depth_k: int
    lam: float
    train_mse: float
    test_mse: float


@dataclass(frozen=True)
class OverlayPoint:
    timestamp: float
    truth: float
    prediction: float
    method: str
    depth_k: int


@dataclass(frozen=True)
class AirQualityResults:
    results: tuple[MethodResult, ...]
    overlay: tuple[OverlayPoint, ...]
    n_windows: int
    n_train: int


def _leakage_guard(ds: WindowedDataset) -> None:
    """Every test target must come strictly after every training target."""
    train_max = ds.target_times[: ds.n_train].max()
    test_min = ds.target_times[ds.n_train:].min()
    if not test_min > train_max:
        raise DomainError("chronological leakage: a test timestamp precedes training data")


def _signature_matrix(ds: WindowedDataset, depth_k: int) -> np.ndarray:
    times = np.linspace(0.0, 1.0, ds.window_len)
    values = ds.standardized_windows()  # (N, 3, L)
    n, _, length = values.shape
    inc = np.empty((n, length - 1, 4))
    inc[:, :, 0] = np.diff(times)[None, :]
    inc[:, :, 1:] = np.diff(values, axis=2).transpose(0, 2, 1)
    return batch_signatures(inc, depth_k)


def _raw_matrix(ds: WindowedDataset) -> np.ndarray:
    flat = ds.standardized_windows().reshape(ds.n_windows, -1)
    return np.column_stack([np.ones(ds.n_windows), flat])


def run_air_quality(
    frame: AirQualityFrame,
    depths: Sequence[int] = (2, 3),
    plan: Optional[CvPlan] = None,
    n_test: int = 250,
    window_len: int = 168,
    overlay_steps: int = 250,
) -> AirQualityResults:
    """Fit baseline Lasso and signature Lasso (each depth) and export overlays.

    The last n_test windows are the chronological test set; lambda is tuned
    by blocked CV (default 900/100) on the training windows only.
    """
    ds = make_windows(frame, window_len=window_len, n_test=n_test)
    _leakage_guard(ds)
    if plan is None:
        plan = CvPlan(block_train=900, block_test=100)
    y = ds.targets
    tr = slice(0, ds.n_train)
    te = slice(ds.n_train, None)
    overlay_steps = min(overlay_steps, ds.n_windows - ds.n_train)

    designs: list[tuple[str, int, np.ndarray]] = [(BASELINE, 0, _raw_matrix(ds))]
    for k in sorted(set(int(k) for k in depths)):
        if k < 1:
            raise DomainError("signature depth must be >= 1")
        designs.append((SIGNATURE, k, _signature_matrix(ds, k)))

    results: list[MethodResult] = []
    overlay: list[OverlayPoint] = []
    for method, depth_k, X in designs:
        best_lam, _cells = cv_fit(X[tr], y[tr], plan)
        fit = lasso_fit(X[tr], y[tr], best_lam)
        pred_train = predict(fit, X[tr])
        pred_test = predict(fit, X[te])
        results.append(
            MethodResult(
                method=method,
                depth_k=depth_k,
                lam=best_lam,
                train_mse=mse(pred_train, y[tr]),
                test_mse=mse(pred_test, y[te]),
            )
        )
        for i in range(overlay_steps):  # first overlay_steps test points, chronological
            overlay.append(
                OverlayPoint(
                    timestamp=float(ds.target_times[ds.n_train + i]),
                    truth=float(y[ds.n_train + i]),
                    prediction=float(pred_test[i]),
                    method=method if depth_k == 0 else f"{method}_k{depth_k}",
                    depth_k=depth_k,
                )
            )
    return AirQualityResults(
        results=tuple(results),
        overlay=tuple(overlay),
        n_windows=ds.n_windows,
        n_train=ds.n_train,
    )


RESULTS_COLUMNS = "method,depth_k,lambda,train_mse,test_mse"
OVERLAY_COLUMNS = "timestamp,truth,prediction,method"


def results_to_csv(res: AirQualityResults, out: TextIO) -> None:
    out.write(RESULTS_COLUMNS + "\n")
    for r in res.results:
        out.write(
            f"{r.method},{r.depth_k},{format(r.lam, '.17g')},"
            f"{format(r.train_mse, '.17g')},{format(r.test_mse, '.17g')}\n"
        )


def overlay_to_csv(res: AirQualityResults, out: TextIO) -> None:
    out.write(OVERLAY_COLUMNS + "\n")
    for p in res.overlay:
        stamp = dt.datetime.fromtimestamp(p.timestamp, dt.timezone.utc)
        out.write(
            f"{stamp.strftime('%Y-%m-%dT%H:%M:%SZ')},{format(p.truth, '.17g')},"
            f"{format(p.prediction, '.17g')},{p.method}\n"
        )
