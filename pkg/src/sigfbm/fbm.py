"""Fractional Brownian motion: covariance, Volterra kernel, and exact samplers.

Paths live on a uniform grid {j*T/n, j=0..n} and start at 0 in every
component. Two exact samplers are provided: Cholesky factorization of the
increment covariance (slow, ground truth) and Davies-Harte circulant
embedding (O(n log n), default). Randomness is counter-based (Philox) with
one substream per (path, component), so batches are reproducible regardless
of generation order.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence, TextIO, Union

import numpy as np
from scipy import integrate

from .errors import CirculantEmbeddingError, DomainError, UnsupportedRegimeError


@dataclass(frozen=True)
class HurstParameter:
    """Roughness index H, strictly inside (0, 1)."""

    h: float

    def __post_init__(self) -> None:
        if not (isinstance(self.h, (int, float)) and math.isfinite(self.h)):
            raise DomainError(f"Hurst parameter must be a finite number, got {self.h!r}")
        if not 0.0 < self.h < 1.0:
            raise DomainError(f"Hurst parameter must lie in (0, 1), got {self.h}")


HurstLike = Union[HurstParameter, float]


def hurst_value(h: HurstLike) -> float:
    """Validate and unwrap a Hurst parameter given as HurstParameter or float."""
    if isinstance(h, HurstParameter):
        return float(h.h)
    return float(HurstParameter(float(h)).h)


class MultiPath:
    """A d-dimensional discretely sampled path.

    times is a strictly increasing grid of length n >= 2; values is the
    (d, n) matrix of samples. Arrays are frozen after construction.
    """

    __slots__ = ("times", "values")

    def __init__(self, times: np.ndarray, values: np.ndarray):
        times = np.ascontiguousarray(times, dtype=float)
        values = np.ascontiguousarray(values, dtype=float)
        if times.ndim != 1 or times.size < 2:
            raise DomainError("times must be a 1-d array with at least 2 points")
        if not np.all(np.diff(times) > 0):
            raise DomainError("times must be strictly increasing")
        if values.ndim != 2 or values.shape[1] != times.size:
            raise DomainError(
                f"values must have shape (d, {times.size}), got {values.shape}"
            )
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(values))):
            raise DomainError("path contains non-finite entries")
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __setattr__(self, name, value):  # pragma: no cover - guard only
        raise AttributeError("MultiPath is immutable")

    @property
    def d(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.times.size

    def increments(self) -> np.ndarray:
        """Consecutive increments, shape (n-1, d)."""
        return np.diff(self.values, axis=1).T


@dataclass(frozen=True)
class FbmConfig:
    """Sampling configuration for one batch of fBm paths."""

    h: HurstLike
    d: int
    n_steps: int
    horizon_t: float = 1.0
    method: str = "davies_harte"
    seed: int = 0

    def __post_init__(self) -> None:
        hurst_value(self.h)
        if self.d < 1:
            raise DomainError("d must be a positive integer")
        if self.n_steps < 1:
            raise DomainError("n_steps must be >= 1")
        if not self.horizon_t > 0:
            raise DomainError("horizon_t must be positive")
        if self.method not in ("cholesky", "davies_harte"):
            raise DomainError(f"unknown method {self.method!r}")

    @property
    def hurst(self) -> float:
        return hurst_value(self.h)


def fbm_cov(s: float, t: float, h: HurstLike) -> float:
    """Covariance E[B_t B_s] = (t^2H + s^2H - |t-s|^2H) / 2 of one component."""
    hv = hurst_value(h)
    if s < 0 or t < 0:
        raise DomainError("fbm_cov requires s >= 0 and t >= 0")
    e = 2.0 * hv
    return 0.5 * (t**e + s**e - abs(t - s) ** e)


def increment_variance(s: float, t: float, h: HurstLike) -> float:
    """Variance (t-s)^2H of the increment over [s, t], 0 <= s < t."""
    hv = hurst_value(h)
    if not 0 <= s < t:
        raise DomainError("increment_variance requires 0 <= s < t")
    return (t - s) ** (2.0 * hv)


def c_h(h: HurstLike) -> float:
    """Normalizing constant (2H Gamma(3/2-H) / (Gamma(2-2H) Gamma(H+1/2)))^(1/2)."""
    hv = hurst_value(h)
    num = 2.0 * hv * math.gamma(1.5 - hv)
    den = math.gamma(2.0 - 2.0 * hv) * math.gamma(hv + 0.5)
    return math.sqrt(num / den)


def volterra_kernel(t: float, u: float, h: HurstLike, epsabs: float = 1e-10) -> float:
    """Volterra kernel K(t, u) of the rough-regime Wiener representation.

    Only defined for H < 1/2; returns 0 outside the support {0 < u < t}.
    The inner integral over [u, t] has an integrable endpoint singularity at
    v = u; the chained substitutions v = u(1+w), z = w/(1+w) map it onto
    int_0^{(t-u)/t} z^(H-1/2) (1-z)^(-2H) dz, evaluated by adaptive
    quadrature to absolute tolerance `epsabs`.
    """
    hv = hurst_value(h)
    if hv >= 0.5:
        raise UnsupportedRegimeError(
            f"volterra_kernel requires H < 1/2 (got H={hv}); the kernel backs the "
            "rough-regime representation only"
        )
    if not 0 < u < t:
        return 0.0
    x = (t - u) / t
    inner, _err = integrate.quad(
        lambda z: z ** (hv - 0.5) * (1.0 - z) ** (-2.0 * hv),
        0.0,
        x,
        epsabs=epsabs,
        limit=200,
    )
    first = (u / t) ** (0.5 - hv) * (t - u) ** (hv - 0.5)
    second = (0.5 - hv) * u ** (hv - 0.5) * inner
    return c_h(hv) * (first + second)


# --- sampling ---------------------------------------------------------------


def fgn_autocov(h: HurstLike, n_lags: int) -> np.ndarray:
    """Autocovariance gamma(0..n_lags) of unit-spacing fractional Gaussian noise."""
    hv = hurst_value(h)
    k = np.arange(n_lags + 1, dtype=float)
    e = 2.0 * hv
    return 0.5 * ((k + 1.0) ** e - 2.0 * k**e + np.abs(k - 1.0) ** e)


@lru_cache(maxsize=32)
def _dh_eigenvalues(h_key: float, n: int) -> np.ndarray:
    """Eigenvalues of the circulant embedding of the fGn covariance (length 2n)."""
    gamma = fgn_autocov(h_key, n)
    circ = np.concatenate([gamma[:n], gamma[n:n + 1], gamma[n - 1:0:-1]])
    lam = np.fft.fft(circ).real
    floor = -1e-10 * max(lam.max(), 1.0)
    if lam.min() < floor:
        raise CirculantEmbeddingError(
            f"circulant embedding for H={h_key}, n={n} has negative eigenvalue "
            f"{lam.min():.3e}; rerun with method='cholesky'"
        )
    lam = np.clip(lam, 0.0, None)
    lam.setflags(write=False)
    return lam


_CHOL_CACHE: dict = {}


def _cholesky_factor(h: float, n: int) -> np.ndarray:
    key = (round(h, 12), n)
    fac = _CHOL_CACHE.get(key)
    if fac is None:
        gamma = fgn_autocov(h, n - 1)
        idx = np.arange(n)
        cov = gamma[np.abs(idx[:, None] - idx[None, :])]
        try:
            fac = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(
                f"Cholesky factorization of the fGn covariance failed for H={h}, n={n}"
            ) from exc
        _CHOL_CACHE[key] = fac
    return fac


def substream(seed: int, path_index: int, component: int) -> np.random.Generator:
    """Counter-based generator for one (path, component) substream."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(path_index, component))
    return np.random.Generator(np.random.Philox(ss))


def _unit_fgn(cfg: FbmConfig, rng: np.random.Generator) -> np.ndarray:
    """One unit-spacing fGn sequence of length cfg.n_steps."""
    n = cfg.n_steps
    if cfg.method == "davies_harte":
        lam = _dh_eigenvalues(round(cfg.hurst, 12), n)
        # Fixed draw layout; part of the determinism contract.
        z0 = rng.standard_normal()
        zn = rng.standard_normal()
        if n > 1:
            re = rng.standard_normal(n - 1)
            im = rng.standard_normal(n - 1)
        w = np.zeros(2 * n, dtype=complex)
        w[0] = math.sqrt(lam[0] / (2 * n)) * z0
        w[n] = math.sqrt(lam[n] / (2 * n)) * zn
        if n > 1:
            amp = np.sqrt(lam[1:n] / (4 * n))
            w[1:n] = amp * (re + 1j * im)
            w[n + 1:] = np.conj(w[n - 1:0:-1])
        return np.fft.fft(w)[:n].real
    fac = _cholesky_factor(cfg.hurst, n)
    return fac @ rng.standard_normal(n)


def sample_fbm_increments(
    cfg: FbmConfig, n_paths: int, first_path_index: int = 0
) -> np.ndarray:
    """fBm increments on the uniform grid, shape (n_paths, n_steps, d).

    Component c of path p consumes substream (cfg.seed, first_path_index + p, c)
    only, so any partition of the batch reproduces the same values.
    """
    if n_paths < 1:
        raise DomainError("n_paths must be >= 1")
    dt = cfg.horizon_t / cfg.n_steps
    scale = dt**cfg.hurst
    out = np.empty((n_paths, cfg.n_steps, cfg.d))
    for p in range(n_paths):
        for c in range(cfg.d):
            rng = substream(cfg.seed, first_path_index + p, c)
            out[p, :, c] = scale * _unit_fgn(cfg, rng)
    return out


def sample_fbm(cfg: FbmConfig, path_index: int = 0) -> MultiPath:
    """One fBm path on {j*T/n}; B_0 = 0 in every component."""
    inc = sample_fbm_increments(cfg, 1, first_path_index=path_index)[0]
    times = np.linspace(0.0, cfg.horizon_t, cfg.n_steps + 1)
    values = np.zeros((cfg.d, cfg.n_steps + 1))
    values[:, 1:] = np.cumsum(inc, axis=0).T
    return MultiPath(times, values)


def sample_fbm_paths(
    cfg: FbmConfig, n_paths: int, first_path_index: int = 0
) -> list[MultiPath]:
    """A batch of independent fBm paths."""
    inc = sample_fbm_increments(cfg, n_paths, first_path_index=first_path_index)
    times = np.linspace(0.0, cfg.horizon_t, cfg.n_steps + 1)
    paths = []
    for p in range(n_paths):
        values = np.zeros((cfg.d, cfg.n_steps + 1))
        values[:, 1:] = np.cumsum(inc[p], axis=0).T
        paths.append(MultiPath(times, values))
    return paths


# --- serialization ----------------------------------------------------------


def path_to_csv(path: MultiPath, out: TextIO) -> None:
    """Write a path as `t,x1,...,xd` rows with 17 significant digits."""
    header = "t," + ",".join(f"x{i}" for i in range(1, path.d + 1))
    out.write(header + "\n")
    for j in range(path.n):
        row = [format(path.times[j], ".17g")]
        row.extend(format(path.values[i, j], ".17g") for i in range(path.d))
        out.write(",".join(row) + "\n")


def path_to_csv_string(path: MultiPath) -> str:
    buf = io.StringIO()
    path_to_csv(path, buf)
    return buf.getvalue()


def path_from_csv(src: Union[TextIO, Iterable[str]]) -> MultiPath:
    """Parse a path written by path_to_csv."""
    lines = [ln.strip() for ln in src if ln.strip()]
    if not lines:
        raise DomainError("empty path CSV")
    header = lines[0].split(",")
    if header[0] != "t" or len(header) < 2:
        raise DomainError(f"bad path CSV header: {lines[0]!r}")
    rows = [[float(tok) for tok in ln.split(",")] for ln in lines[1:]]
    arr = np.asarray(rows)
    if arr.ndim != 2 or arr.shape[1] != len(header):
        raise DomainError("path CSV rows do not match header width")
    return MultiPath(arr[:, 0], arr[:, 1:].T)
