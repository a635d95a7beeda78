"""Fourier spectra of magnetization series, peak picking and E8 labelling.

Frequencies are angular (radians per unit time).  The magnitudes are the
plain ``|rfft|`` of the mean-subtracted window, so Parseval reads::

    sum(x**2) == (|X_0|**2 + 2 sum_{0<k<N/2} |X_k|**2 + |X_{N/2}|**2) / N

with the last term present only for even ``N``.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import get_window, peak_prominences

from .model import E8_RATIOS, e8_reference
from .series import TimeSeries, read_columns

MIN_WINDOW = 8
REL_TOL = 0.15


@dataclass
class Spectrum:
    omegas: np.ndarray
    magnitudes: np.ndarray
    d_omega: float
    window: dict = field(default_factory=dict)

    def __post_init__(self):
        self.omegas = np.asarray(self.omegas, dtype=np.float64)
        self.magnitudes = np.asarray(self.magnitudes, dtype=np.float64)
        if self.omegas.shape != self.magnitudes.shape:
            raise ValueError("omegas and magnitudes differ in shape")

    def __len__(self):
        return len(self.omegas)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["omega", "magnitude"])
            for o, m in zip(self.omegas, self.magnitudes):
                w.writerow([repr(float(o)), repr(float(m))])

    @classmethod
    def from_csv(cls, path) -> "Spectrum":
        o, m = read_columns(path, ("omega", "magnitude"))
        if len(o) < 2:
            raise ValueError(f"{path}: spectrum needs at least two bins")
        return cls(o, m, float(o[1] - o[0]), {"source": str(path)})


def fourier(series: TimeSeries, t_cut: float, taper: str = "rect") -> Spectrum:
    """Magnitude spectrum of the samples in ``[0, t_cut)``.

    The window holds ``N = t_cut / dt`` samples, so ``d_omega = 2 pi / t_cut``.
    If an invalid sample falls inside, the window is cut at the first one and
    ``d_omega`` follows the shorter span; ``window['truncated']`` says so.
    """
    if not t_cut > 0:
        raise ValueError("t_cut must be positive")
    if t_cut > series.duration + 1e-9 * max(1.0, t_cut):
        raise ValueError(f"t_cut={t_cut} exceeds the series duration {series.duration:g}")
    n = int(round(t_cut / series.dt))
    if abs(n * series.dt - t_cut) > 1e-9 * max(1.0, t_cut):
        raise ValueError(f"t_cut={t_cut} is not a multiple of dt={series.dt}")
    bad = np.flatnonzero(~series.valid[:n])
    truncated = bool(len(bad))
    if truncated:
        n = int(bad[0])
    if n < MIN_WINDOW:
        raise ValueError(f"window holds {n} valid samples; need at least {MIN_WINDOW}")
    span = t_cut if not truncated else n * series.dt
    x = series.values[:n] - np.mean(series.values[:n])
    if taper == "hann":
        x = x * get_window("hann", n)
    elif taper != "rect":
        raise ValueError(f"unknown taper {taper!r}")
    mags = np.abs(np.fft.rfft(x))
    d_omega = 2.0 * math.pi / span
    omegas = d_omega * np.arange(len(mags))
    window = {"t_start": 0.0, "t_cut": float(span), "n_samples": n, "dt": series.dt,
              "taper": taper, "truncated": truncated}
    return Spectrum(omegas, mags, d_omega, window)


# --------------------------------------------------------------------------
# peaks
# --------------------------------------------------------------------------

@dataclass
class Peak:
    omega: float
    magnitude: float
    prominence: float = 0.0
    label: str | None = None
    sources: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {"omega": self.omega, "magnitude": self.magnitude, "prominence": self.prominence,
                "label": self.label, "sources": list(self.sources)}


def find_peaks(spec: Spectrum, min_prominence: float = 0.02,
               band: tuple[float, float] | None = None) -> list[Peak]:
    """Strict local maxima in ``band`` with prominence >= ``min_prominence * max``.

    ``max`` is the largest magnitude inside the band.  Results are sorted by
    magnitude, tallest first.
    """
    m = spec.magnitudes
    lo, hi = band if band is not None else (spec.omegas[0], spec.omegas[-1])
    inside = (spec.omegas >= lo - 1e-12) & (spec.omegas <= hi + 1e-12)
    if not inside.any():
        raise ValueError(f"band [{lo}, {hi}] holds no frequency bins")
    if len(m) < 3:
        return []
    idx = np.flatnonzero((m[1:-1] > m[:-2]) & (m[1:-1] > m[2:])) + 1
    idx = idx[inside[idx]]
    if not len(idx):
        return []
    prom = peak_prominences(m, idx)[0]
    floor = min_prominence * float(np.max(m[inside]))
    keep = prom >= floor
    peaks = [Peak(float(spec.omegas[i]), float(m[i]), float(p))
             for i, p in zip(idx[keep], prom[keep])]
    peaks.sort(key=lambda p: (-p.magnitude, p.omega))
    return peaks


# --------------------------------------------------------------------------
# E8 assignment
# --------------------------------------------------------------------------

@dataclass
class Deviation:
    label: str
    measured: float | None
    predicted: float
    deviation: float | None


@dataclass
class PeakReport:
    peaks: list[Peak]
    m1: float
    d_omega: float
    tolerance: float
    deviations: list[Deviation]

    def labeled(self, label: str) -> Peak | None:
        for p in self.peaks:
            if p.label == label:
                return p
        return None

    @property
    def labels(self) -> list[str]:
        return [d.label for d in self.deviations if d.measured is not None]

    def as_dict(self) -> dict:
        return {
            "m1": self.m1,
            "d_omega": self.d_omega,
            "tolerance": self.tolerance,
            "peaks": [p.as_dict() for p in self.peaks],
            "deviations": [
                {"label": d.label, "measured": d.measured, "predicted": d.predicted,
                 "deviation": d.deviation,
                 "measured_over_m1": None if d.measured is None else d.measured / self.m1,
                 "predicted_over_m1": d.predicted / self.m1,
                 "deviation_over_m1": None if d.deviation is None else d.deviation / self.m1}
                for d in self.deviations],
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.as_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def to_markdown(self, name: str = "value") -> str:
        return comparison_table({name: self})


def _ratio(x: float | None, m1: float, signed: bool = False) -> str:
    if x is None:
        return "n/a"
    r = x / m1
    if signed:
        return "0" if abs(r) < 5e-4 else f"{r:+.3f} m1"
    return f"{r:.3f} m1"


def comparison_table(reports: dict[str, PeakReport]) -> str:
    """Markdown table: label, E8 prediction, then value and deviation per report."""
    names = list(reports)
    head = ["Label", "E8 prediction"]
    for n in names:
        head += [f"{n} value", f"{n} deviation"]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    for lab, ratio in E8_RATIOS:
        row = [lab, f"{ratio:.3f} m1"]
        for n in names:
            r = reports[n]
            d = next(d for d in r.deviations if d.label == lab)
            row += [_ratio(d.measured, r.m1), _ratio(d.deviation, r.m1, signed=True)]
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"


def _match(peaks: list[Peak], m1: float, tol: float) -> dict[str, Peak]:
    """Tallest peak first, each to the nearest unclaimed entry within ``tol``."""
    entries = dict(e8_reference(m1).entries)
    claimed: dict[str, Peak] = {}
    for p in sorted(peaks, key=lambda p: (-p.magnitude, p.omega)):
        free = [(abs(p.omega - w), lab) for lab, w in entries.items() if lab not in claimed]
        if not free:
            break
        dist, lab = min(free)
        if dist <= tol * (1 + 1e-12):
            claimed[lab] = p
    return claimed


def match_tolerance(m1: float, d_omega: float, rel_tol: float = REL_TOL) -> float:
    return max(d_omega, rel_tol * m1)


def estimate_m1(peaks: list[Peak], d_omega: float, rel_tol: float = REL_TOL,
                search_band: tuple[float, float] | None = None) -> float:
    """Pick the candidate ``m1`` whose E8 ladder claims the most peaks.

    Every peak (inside ``search_band`` when given) is tried as ``m1``.  The
    score is the number of matched entries, then their summed magnitude; ties
    go to the taller candidate.
    """
    cands = [p for p in peaks if p.omega > 0 and
             (search_band is None or search_band[0] <= p.omega <= search_band[1])]
    if not cands:
        raise ValueError("no candidate peak for m1")
    best, best_score = None, None
    for c in sorted(cands, key=lambda p: (-p.magnitude, p.omega)):
        got = _match(peaks, c.omega, match_tolerance(c.omega, d_omega, rel_tol))
        if got.get("m1") is not c:
            continue
        score = (len(got), sum(p.magnitude for p in got.values()))
        if best_score is None or score > best_score:
            best, best_score = c, score
    if best is None:
        best = max(cands, key=lambda p: p.magnitude)
    return best.omega


def assign_e8(peaks: list[Peak], d_omega: float, hint_m1: float | None = None,
              rel_tol: float = REL_TOL, search_band: tuple[float, float] | None = None) -> PeakReport:
    """Label peaks with E8 entries and report deviations ``measured - predicted``.

    Matching tolerance is ``max(d_omega, rel_tol * m1)``.  Unmatched peaks keep
    ``label=None``.  Raises when nothing matches.
    """
    if not peaks:
        raise ValueError("assign_e8 needs at least one peak")
    m1 = float(hint_m1) if hint_m1 is not None else estimate_m1(peaks, d_omega, rel_tol, search_band)
    tol = match_tolerance(m1, d_omega, rel_tol)
    claimed = _match(peaks, m1, tol)
    if not claimed:
        raise ValueError(f"no peak lies within {tol:.4g} of any E8 entry for m1={m1:.4g}")
    by_id = {id(p): lab for lab, p in claimed.items()}
    out = [Peak(p.omega, p.magnitude, p.prominence, by_id.get(id(p)), p.sources) for p in peaks]
    devs = []
    for lab, w in e8_reference(m1).entries:
        p = claimed.get(lab)
        devs.append(Deviation(lab, None if p is None else p.omega, w,
                              None if p is None else p.omega - w))
    return PeakReport(out, m1, d_omega, tol, devs)


def aggregate_initial_states(runs, min_prominence: float = 0.02,
                             band: tuple[float, float] | None = None,
                             hint_m1: float | None = None, rel_tol: float = REL_TOL,
                             search_band: tuple[float, float] | None = None) -> PeakReport:
    """Pool peaks from ``(pattern, Spectrum)`` runs and label the union.

    Peaks closer than ``d_omega / 2`` are merged into the taller one, which
    records every initial state that produced it.
    """
    runs = list(runs)
    if not runs:
        raise ValueError("no runs to aggregate")
    d = runs[0][1].d_omega
    for _, s in runs[1:]:
        if not math.isclose(s.d_omega, d, rel_tol=1e-12):
            raise ValueError(f"resolution mismatch: {s.d_omega} vs {d}")
    pool: list[Peak] = []
    for pattern, s in runs:
        for p in find_peaks(s, min_prominence, band):
            pool.append(Peak(p.omega, p.magnitude, p.prominence, None, (str(pattern),)))
    pool.sort(key=lambda p: (-p.magnitude, p.omega))
    merged: list[Peak] = []
    for p in pool:
        for q in merged:
            if abs(q.omega - p.omega) < d / 2:
                if p.sources[0] not in q.sources:
                    q.sources = q.sources + p.sources
                break
        else:
            merged.append(p)
    return assign_e8(merged, d, hint_m1=hint_m1, rel_tol=rel_tol, search_band=search_band)
