"""Two-detector photon correlations (HBT) and a single-emitter photon source."""

from __future__ import annotations

import math

import numpy as np

from ..rng import substream

REEXCITATION_MEAN_NS = 10.0


def simulate_g2(signal_fraction: float, rate: float, duration: float, seed: int = 0,
                reexcitation_ns: float = REEXCITATION_MEAN_NS):
    """Photon arrival times behind a 50/50 beam splitter.

    ``rate`` is the total detected rate in counts per ns and ``duration`` is in
    ns. A fraction ``signal_fraction`` of the light comes from one emitter whose
    successive detections are separated by an exponential re-excitation delay
    (mean ``reexcitation_ns``) plus an exponential wait, so two signal photons
    never coincide. The rest is Poissonian background.

    Returns ``(channel, time_ns)`` arrays sorted by time.
    """
    p = float(signal_fraction)
    if not 0.0 <= p <= 1.0:
        raise ValueError("signal_fraction must lie in [0, 1]")
    if rate <= 0 or duration <= 0:
        raise ValueError("rate and duration must be positive")
    rng = substream(seed, "g2")
    times = []
    sig_rate = p * rate
    if sig_rate > 0:
        mean_interval = 1.0 / sig_rate
        if mean_interval <= reexcitation_ns:
            raise ValueError("signal rate too high for the re-excitation delay")
        n = int(duration * sig_rate * 1.1 + 10 * math.sqrt(duration * sig_rate) + 10)
        gaps = rng.exponential(reexcitation_ns, n) + rng.exponential(mean_interval - reexcitation_ns, n)
        t = np.cumsum(gaps)
        while t[-1] < duration:
            more = rng.exponential(reexcitation_ns, n) + rng.exponential(mean_interval - reexcitation_ns, n)
            t = np.concatenate([t, t[-1] + np.cumsum(more)])
        # random start phase keeps the stream stationary
        t = t - rng.uniform(0.0, mean_interval)
        times.append(t[(t >= 0) & (t < duration)])
    bg_rate = (1.0 - p) * rate
    if bg_rate > 0:
        nb = rng.poisson(bg_rate * duration)
        times.append(rng.uniform(0.0, duration, nb))
    t = np.sort(np.concatenate(times)) if times else np.empty(0)
    channel = rng.integers(0, 2, t.size)
    return channel, t


def g2_histogram(channel, time_ns, bin_width: float, max_tau: float, duration: float | None = None):
    """Normalized start-stop coincidence histogram between channels 0 and 1.

    ``tau = t1 - t0``. Counts are divided by ``N0 * N1 * bin_width / duration``
    so uncorrelated light gives 1. Returns ``(tau_centers, g2, counts,
    expected_per_bin)``; the central bin is centered on ``tau = 0``.
    """
    channel = np.asarray(channel)
    t = np.asarray(time_ns, dtype=float)
    if bin_width <= 0 or max_tau <= 0:
        raise ValueError("bin_width and max_tau must be positive")
    t0 = np.sort(t[channel == 0])
    t1 = np.sort(t[channel == 1])
    if t0.size == 0 or t1.size == 0:
        raise ValueError("both detection channels need at least one photon")
    if duration is None:
        duration = float(t.max() - t.min())
    half_bins = int(math.ceil(max_tau / bin_width - 0.5))
    edges = (np.arange(-half_bins, half_bins + 2) - 0.5) * bin_width
    lo_edge, hi_edge = edges[0], edges[-1]
    counts = np.zeros(edges.size - 1, dtype=np.int64)
    start = np.searchsorted(t1, t0 + lo_edge, side="left")
    stop = np.searchsorted(t1, t0 + hi_edge, side="left")
    width = stop - start
    for k in range(int(width.max()) if width.size else 0):
        sel = width > k
        dtau = t1[start[sel] + k] - t0[sel]
        idx = np.floor((dtau - lo_edge) / bin_width).astype(np.int64)
        idx = idx[(idx >= 0) & (idx < counts.size)]
        counts += np.bincount(idx, minlength=counts.size)
    expected = t0.size * t1.size * bin_width / duration
    centers = 0.5 * (edges[:-1] + edges[1:])
    return centers, counts / expected, counts, expected


def g2_zero(channel, time_ns, bin_width: float, duration: float | None = None):
    """``(g2(0), sigma)`` from the central bin with Poisson counting error."""
    _, g2, counts, expected = g2_histogram(channel, time_ns, bin_width, bin_width, duration)
    mid = counts.size // 2
    n = counts[mid]
    return float(g2[mid]), math.sqrt(max(n, 1)) / expected


def mixed_g2_zero(signal_fraction: float) -> float:
    """Ideal single emitter mixed with Poisson background: ``1 - p**2``."""
    return 1.0 - signal_fraction ** 2


def read_timestamps(path):
    """Read ``channel,time_ns`` CSV (with header) or a binary ``.npy`` structured file."""
    path = str(path)
    if path.endswith(".npy"):
        arr = np.load(path)
        return arr["channel"].astype(np.int64), arr["time_ns"].astype(float)
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0:
        return np.empty(0, dtype=np.int64), np.empty(0)
    return data[:, 0].astype(np.int64), data[:, 1]


def write_timestamps(path, channel, time_ns):
    path = str(path)
    channel = np.asarray(channel)
    time_ns = np.asarray(time_ns, dtype=float)
    if path.endswith(".npy"):
        arr = np.empty(time_ns.size, dtype=[("channel", "i1"), ("time_ns", "f8")])
        arr["channel"] = channel
        arr["time_ns"] = time_ns
        np.save(path, arr)
        return
    with open(path, "w", newline="") as fh:
        fh.write("channel,time_ns\n")
        for c, t in zip(channel, time_ns):
            fh.write(f"{int(c)},{t:.6f}\n")
