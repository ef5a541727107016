"""Shared fixtures: synthetic air-quality frames and UCI-format CSV writers."""

import datetime as dt
from pathlib import Path

import numpy as np
import pytest

from sigfbm.airquality import AirQualityFrame

EPOCH_START = dt.datetime(2004, 3, 10, 18, tzinfo=dt.timezone.utc).timestamp()

UCI_HEADER = (
    "Date;Time;CO(GT);PT08.S1(CO);NMHC(GT);C6H6(GT);PT08.S2(NMHC);NOx(GT);"
    "PT08.S3(NOx);NO2(GT);PT08.S4(NO2);PT08.S5(O3);T;RH;AH;;"
)


def synthetic_frame(
    n_hours: int = 1600,
    seed: int = 0,
    masked_hours: tuple = (),
    gap_after: tuple = (),
    constant_no2: float | None = None,
) -> AirQualityFrame:
    """ARMA-like hourly NO2/T/RH series with optional masked cells and gaps."""
    rng = np.random.default_rng(seed)
    hours = np.arange(n_hours, dtype=float)
    daily = np.sin(2 * np.pi * hours / 24.0)

    def ar1(level, amp, phase, sigma, rho=0.85):
        noise = np.empty(n_hours)
        noise[0] = rng.standard_normal()
        eps = rng.standard_normal(n_hours)
        for i in range(1, n_hours):
            noise[i] = rho * noise[i - 1] + eps[i]
        return level + amp * np.sin(2 * np.pi * hours / 24.0 + phase) + sigma * noise

    no2 = ar1(90.0, 25.0, 0.3, 8.0)
    if constant_no2 is not None:
        no2 = np.full(n_hours, constant_no2)
    temperature = ar1(15.0, 6.0, 1.2, 1.5)
    humidity = ar1(55.0, 12.0, 2.6, 3.0)

    timestamps = EPOCH_START + 3600.0 * hours
    offset = np.zeros(n_hours)
    for g in gap_after:
        offset[g + 1:] += 3600.0 * 3  # three missing hours
    timestamps = timestamps + offset

    mask = np.ones((n_hours, 3), dtype=bool)
    for h in masked_hours:
        mask[h, 0] = False
        no2 = no2.copy()
        no2[h] = np.nan
    return AirQualityFrame(
        timestamps=timestamps,
        no2=no2,
        temperature=temperature,
        humidity=humidity,
        validity_mask=mask,
    )


def write_uci_csv(path: Path, rows: list[dict]) -> None:
    """Write rows in the dataset's layout: semicolons, decimal commas, -200 sentinel."""

    def fmt(value):
        if value is None:
            return "-200"
        return f"{value:.1f}".replace(".", ",")

    lines = [UCI_HEADER]
    for r in rows:
        stamp = dt.datetime.fromtimestamp(r["ts"], dt.timezone.utc)
        lines.append(
            ";".join(
                [
                    stamp.strftime("%d/%m/%Y"),
                    stamp.strftime("%H.00.00"),
                    "2,6", "1360", "150", "11,9", "1046", "166", "1056",
                    fmt(r.get("no2")),
                    "1692", "1268",
                    fmt(r.get("t", 13.6)),
                    fmt(r.get("rh", 48.9)),
                    "0,7578", "", "",
                ]
            )
        )
    path.write_text("\n".join(lines) + "\n")


@pytest.fixture
def uci_csv_factory(tmp_path):
    def factory(name: str, rows: list[dict]) -> Path:
        target = tmp_path / name
        write_uci_csv(target, rows)
        return target

    return factory
