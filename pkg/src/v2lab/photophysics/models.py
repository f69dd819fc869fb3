from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EmitterModel:
    """Spectral parameters of one emitter.

    Linewidths in MHz, ``c0`` in mean counts per probe block, diffusion rate
    ``gamma_d`` in MHz/ms (so ``gamma_d / gamma`` is a rate in 1/ms),
    ionization rate ``gamma_i`` in 1/ms, center offset ``f0`` in GHz.
    """

    gamma: float
    c0: float
    gamma_d: float = 0.0
    gamma_i: float = 0.0
    f0: float = 0.0
    gamma_lifetime: float | None = None

    def __post_init__(self):
        lifetime = self.gamma if self.gamma_lifetime is None else self.gamma_lifetime
        if not lifetime > 0:
            raise ValueError("gamma_lifetime must be positive")
        if self.gamma < lifetime:
            raise ValueError("gamma must be >= gamma_lifetime")
        if self.c0 < 0:
            raise ValueError("c0 must be non-negative")
        if self.gamma_d < 0 or self.gamma_i < 0:
            raise ValueError("rates must be non-negative")
        object.__setattr__(self, "gamma_lifetime", float(lifetime))


@dataclass(frozen=True)
class CheckProbeRecord:
    rep: int
    delay_ms: float
    check_counts: int
    probe_counts: int
    probe_detuning_mhz: float = 0.0

    def __post_init__(self):
        if self.check_counts < 0 or self.probe_counts < 0:
            raise ValueError("counts must be non-negative")
        if not math.isfinite(self.delay_ms):
            raise ValueError("delay must be finite")


class CheckProbeRecords(Sequence):
    """Array-backed sequence of :class:`CheckProbeRecord`.

    Behaves like a list of records; analysis code reads the columns directly.
    """

    fields = ("rep", "delay_ms", "check_counts", "probe_counts", "probe_detuning_mhz")

    def __init__(self, rep, delay_ms, check_counts, probe_counts, probe_detuning_mhz=None):
        self.rep = np.asarray(rep, dtype=np.int64)
        n = self.rep.size
        self.delay_ms = np.broadcast_to(np.asarray(delay_ms, dtype=float), (n,)).copy()
        self.check_counts = np.asarray(check_counts, dtype=np.int64)
        self.probe_counts = np.asarray(probe_counts, dtype=np.int64)
        det = 0.0 if probe_detuning_mhz is None else probe_detuning_mhz
        self.probe_detuning_mhz = np.broadcast_to(np.asarray(det, dtype=float), (n,)).copy()
        if not (self.check_counts.shape == self.probe_counts.shape == (n,)):
            raise ValueError("column lengths differ")
        if n and (self.check_counts.min() < 0 or self.probe_counts.min() < 0):
            raise ValueError("counts must be non-negative")
        if not np.all(np.isfinite(self.delay_ms)):
            raise ValueError("delay must be finite")

    @classmethod
    def from_records(cls, records) -> "CheckProbeRecords":
        if isinstance(records, cls):
            return records
        records = list(records)
        return cls(
            [r.rep for r in records],
            [r.delay_ms for r in records],
            [r.check_counts for r in records],
            [r.probe_counts for r in records],
            [r.probe_detuning_mhz for r in records],
        )

    def __len__(self):
        return int(self.rep.size)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return CheckProbeRecords(*(getattr(self, f)[i] for f in self.fields))
        return CheckProbeRecord(int(self.rep[i]), float(self.delay_ms[i]), int(self.check_counts[i]),
                                int(self.probe_counts[i]), float(self.probe_detuning_mhz[i]))


@dataclass(frozen=True)
class FrequencyPrior:
    """Distribution of the emitter frequency (MHz) across repetitions.

    ``kind`` is ``"uniform"`` (``center +- width``), ``"gaussian"`` (``width``
    is the FWHM) or ``"dirac"``.
    """

    kind: str = "dirac"
    center: float = 0.0
    width: float = 0.0

    def __post_init__(self):
        if self.kind not in ("uniform", "gaussian", "dirac"):
            raise ValueError(f"unknown prior kind {self.kind!r}")
        if self.width < 0:
            raise ValueError("prior width must be non-negative")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "dirac" or self.width == 0:
            return np.full(n, float(self.center))
        if self.kind == "uniform":
            return rng.uniform(self.center - self.width, self.center + self.width, n)
        sigma = self.width / (2.0 * math.sqrt(2.0 * math.log(2.0)))
        return rng.normal(self.center, sigma, n)

    @property
    def support(self) -> tuple[float, float] | None:
        if self.kind == "uniform":
            return (self.center - self.width, self.center + self.width)
        return None


@dataclass(frozen=True)
class FarFieldProfile:
    theta: np.ndarray
    p_boundary: np.ndarray
    p_tot: float

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        p = np.asarray(self.p_boundary, dtype=float)
        if theta.ndim != 1 or theta.shape != p.shape or theta.size < 2:
            raise ValueError("theta and p_boundary must be matching 1-D arrays")
        if np.any(np.diff(theta) <= 0) or theta[0] < 0 or theta[-1] > math.pi / 2 + 1e-12:
            raise ValueError("theta must ascend within [0, pi/2]")
        if np.any(p < 0):
            raise ValueError("p_boundary must be non-negative")
        if not self.p_tot > 0:
            raise ValueError("p_tot must be positive")
        if np.trapezoid(p, theta) > self.p_tot * (1 + 1e-9):
            raise ValueError("integrated boundary power exceeds p_tot")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "p_boundary", p)
