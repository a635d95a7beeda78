"""Uniformly sampled observable series and their CSV form."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class TimeSeries:
    """``values[k]`` is the observable at ``t = k * dt``; ``values[0]`` is t=0.

    ``valid`` marks samples usable downstream (mitigation can invalidate
    points whose reference is too close to zero).
    """

    dt: float
    values: np.ndarray
    meta: dict = field(default_factory=dict)
    valid: np.ndarray | None = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.valid is None:
            self.valid = np.ones(len(self.values), dtype=bool)
        else:
            self.valid = np.asarray(self.valid, dtype=bool)
            if self.valid.shape != self.values.shape:
                raise ValueError("valid mask must match values")

    def __len__(self):
        return len(self.values)

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.values)) * self.dt

    @property
    def duration(self) -> float:
        return (len(self.values) - 1) * self.dt

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "sz_cen"])
            for t, v in zip(self.times, self.values):
                w.writerow([repr(float(t)), repr(float(v))])

    @classmethod
    def from_csv(cls, path, meta: dict | None = None) -> "TimeSeries":
        t, v = read_columns(path, ("t", "sz_cen"))
        # NaN marks a sample dropped upstream (e.g. by mitigation)
        return cls(dt=infer_dt(t), values=v, meta=dict(meta or {}, source=str(path)),
                   valid=np.isfinite(v))


def n_steps(dt: float, t_max: float) -> int:
    """Number of ``dt`` steps in ``t_max``; rejects non-integer ratios."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if t_max < 0:
        raise ValueError("t_max must be non-negative")
    k = int(round(t_max / dt))
    if abs(k * dt - t_max) > 1e-9 * max(1.0, t_max):
        raise ValueError(f"dt={dt} does not divide t_max={t_max}")
    return k


def infer_dt(t: np.ndarray) -> float:
    if len(t) < 2:
        raise ValueError("need at least two samples to infer dt")
    steps = np.diff(t)
    dt = float(np.mean(steps))
    if np.max(np.abs(steps - dt)) > 1e-9 * max(1.0, dt):
        raise ValueError("time column is not uniformly spaced")
    if abs(t[0]) > 1e-12:
        raise ValueError("series must start at t=0")
    return dt


def read_columns(path, names) -> tuple[np.ndarray, ...]:
    with open(Path(path), newline="") as fh:
        rows = list(csv.DictReader(fh))
    missing = [n for n in names if rows and n not in rows[0]]
    if not rows or missing:
        raise ValueError(f"{path}: missing columns {missing or list(names)}")
    return tuple(np.array([float(r[n]) for r in rows]) for n in names)
