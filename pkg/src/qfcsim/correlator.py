"""HBT coincidence histograms, g2(0) estimators and TCSPC lifetime fits.

Histogram bins are centred on integer multiples of the bin width.  A delay
``tau = t_B - t_A`` falls into bin ``floor(tau / width + 1/2) + K`` where
``K = round(window / width)``; the sliding-window correlator and the
all-pairs oracle share this binning rule so they agree bin for bin.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit

from .errors import ConfigurationError, FitError, StatisticsError
from .source import PhotonStream


@dataclass(frozen=True)
class HbtConfig:
    """Beamsplitter ratio, histogram binning and normalization mode."""

    mode: str = "cw"
    splitter_ratio: float = 0.5
    bin_width_ns: float = 0.256
    window_ns: float | None = None
    tail_start_ns: float = 30.0
    period_ns: float | None = None

    def __post_init__(self):
        if self.mode not in ("cw", "pulsed"):
            raise ConfigurationError(f"hbt.mode must be 'cw' or 'pulsed', got {self.mode!r}")
        if self.window_ns is None:
            object.__setattr__(self, "window_ns", 100.0 if self.mode == "cw" else 220.0)
        if not self.bin_width_ns > 0:
            raise ConfigurationError("hbt.bin_width_ns must be positive")
        if not self.window_ns > self.bin_width_ns:
            raise ConfigurationError("hbt.window_ns must exceed the bin width")
        if not 0 < self.splitter_ratio < 1:
            raise ConfigurationError(f"hbt.splitter_ratio must lie in (0, 1), got {self.splitter_ratio}")
        if self.mode == "pulsed" and not (self.period_ns and self.period_ns > 0):
            raise ConfigurationError("pulsed hbt needs a positive period_ns")
        if self.mode == "cw" and not self.tail_start_ns < self.window_ns:
            raise ConfigurationError("hbt.tail_start_ns must lie inside the window")

    @property
    def half_bins(self) -> int:
        return int(round(self.window_ns / self.bin_width_ns))

    @property
    def n_bins(self) -> int:
        return 2 * self.half_bins + 1

    def bin_centers(self):
        return (np.arange(self.n_bins) - self.half_bins) * self.bin_width_ns


def _bin_index(tau, cfg: HbtConfig):
    return np.floor(tau / cfg.bin_width_ns + 0.5).astype(np.int64) + cfg.half_bins


@dataclass(frozen=True, eq=False)
class CorrelationHistogram:
    bin_centers: np.ndarray
    counts: np.ndarray
    config: HbtConfig
    n_starts: int
    n_stops: int
    normalization: float = math.nan
    g2: np.ndarray = field(default=None)
    empty: bool = False

    def merge(self, other: "CorrelationHistogram") -> "CorrelationHistogram":
        if other.config != self.config:
            raise ValueError("cannot merge histograms with different configurations")
        return normalize(CorrelationHistogram(self.bin_centers, self.counts + other.counts, self.config,
                                              self.n_starts + other.n_starts, self.n_stops + other.n_stops))

    __add__ = merge

    def to_csv(self) -> str:
        lines = ["bin_center_ns,counts,g2"]
        for c, n, g in zip(self.bin_centers.tolist(), self.counts.tolist(), self.g2.tolist()):
            lines.append(f"{c!r},{n},{g!r}")
        return "\n".join(lines) + "\n"


def _times(x):
    return x.time_ns if isinstance(x, PhotonStream) else np.asarray(x, dtype=np.float64)


def split_stream(stream: PhotonStream, ratio: float, seed: int):
    """Send each photon to output A with probability ``ratio``, otherwise to B."""
    if not 0.0 <= ratio <= 1.0:
        raise ConfigurationError(f"splitter ratio must lie in [0, 1], got {ratio}")
    rng = np.random.default_rng(seed)
    to_a = rng.random(len(stream)) < ratio
    return stream.select(to_a, seed=seed), stream.select(~to_a, seed=seed)


def correlate(stream_a, stream_b, cfg: HbtConfig, max_pairs_per_block: int = 4_000_000) -> CorrelationHistogram:
    """Histogram of all delays t_B - t_A inside the window (sliding-window sweep).

    For each start the admissible stops form a contiguous run of the sorted
    stop array; runs are found with binary search and expanded in blocks, so
    the cost is linear in events plus pairs.
    """
    a, b = _times(stream_a), _times(stream_b)
    counts = np.zeros(cfg.n_bins, np.int64)
    if len(a) == 0 or len(b) == 0:
        return normalize(CorrelationHistogram(cfg.bin_centers(), counts, cfg, len(a), len(b), empty=True))
    reach = (cfg.half_bins + 1) * cfg.bin_width_ns
    lo = np.searchsorted(b, a - reach, side="left")
    hi = np.searchsorted(b, a + reach, side="right")
    per_start = hi - lo
    cum = np.cumsum(per_start)
    start = 0
    while start < len(a):
        base = cum[start - 1] if start else 0
        stop = int(np.searchsorted(cum, base + max_pairs_per_block, side="right"))
        stop = max(stop, start + 1)
        n = per_start[start:stop]
        total = int(n.sum())
        if total:
            ia = np.repeat(np.arange(start, stop), n)
            offs = np.arange(total) - np.repeat(np.cumsum(n) - n, n)
            ib = lo[ia] + offs
            idx = _bin_index(b[ib] - a[ia], cfg)
            idx = idx[(idx >= 0) & (idx < cfg.n_bins)]
            counts += np.bincount(idx, minlength=cfg.n_bins)
        start = stop
    return normalize(CorrelationHistogram(cfg.bin_centers(), counts, cfg, len(a), len(b)))


def correlate_bruteforce(stream_a, stream_b, cfg: HbtConfig, block: int = 512) -> CorrelationHistogram:
    """All-pairs O(N_A N_B) reference correlator; inputs need not be sorted."""
    a, b = _times(stream_a), _times(stream_b)
    counts = np.zeros(cfg.n_bins, np.int64)
    for i in range(0, len(a), block):
        d = b[None, :] - a[i:i + block, None]
        idx = _bin_index(d.ravel(), cfg)
        idx = idx[(idx >= 0) & (idx < cfg.n_bins)]
        counts += np.bincount(idx, minlength=cfg.n_bins)
    empty = len(a) == 0 or len(b) == 0
    return normalize(CorrelationHistogram(cfg.bin_centers(), counts, cfg, len(a), len(b), empty=empty))


def _peak_areas(hist: CorrelationHistogram, period_ns: float):
    """Counts inside +-period/2 of every peak that fits in the histogram.

    Bins straddling a window edge contribute in proportion to their overlap.
    """
    w = hist.config.bin_width_ns
    edge = (hist.config.half_bins + 0.5) * w
    m_max = int(math.floor((edge - period_ns / 2) / period_ns + 1e-9))
    lo_b = hist.bin_centers - w / 2
    hi_b = hist.bin_centers + w / 2
    areas = {}
    for m in range(-m_max, m_max + 1):
        lo_w, hi_w = m * period_ns - period_ns / 2, m * period_ns + period_ns / 2
        overlap = np.clip(np.minimum(hi_b, hi_w) - np.maximum(lo_b, lo_w), 0.0, w) / w
        areas[m] = float(np.dot(hist.counts, overlap))
    return areas


def normalize(hist: CorrelationHistogram) -> CorrelationHistogram:
    cfg = hist.config
    counts = hist.counts
    if hist.empty or counts.sum() == 0:
        return replace(hist, normalization=math.nan, g2=np.full(len(counts), math.nan), empty=True)
    if cfg.mode == "cw":
        tail = np.abs(hist.bin_centers) >= cfg.tail_start_ns
        norm = float(counts[tail].mean())
    else:
        areas = _peak_areas(hist, cfg.period_ns)
        side = [v for m, v in areas.items() if m != 0]
        norm = float(np.mean(side)) * cfg.bin_width_ns / cfg.period_ns if side else math.nan
    g2 = counts / norm if norm > 0 else np.full(len(counts), math.nan)
    return replace(hist, normalization=norm, g2=g2)


@dataclass(frozen=True)
class G2Result:
    g2_0: float
    sigma: float
    method: str
    params: dict = field(default_factory=dict)

    def to_record(self, prefix: str = "") -> str:
        p = f"{prefix}." if prefix else ""
        lines = [f"{p}g2_0 = {self.g2_0:.6f}", f"{p}g2_0_sigma = {self.sigma:.6f}", f"{p}method = {self.method}"]
        for k, v in self.params.items():
            lines.append(f"{p}{k} = {v:.6g}" if isinstance(v, float) else f"{p}{k} = {v}")
        return "\n".join(lines)


def _binned_dip(x, g0, tau_c, width):
    # bin average of 1 - (1 - g0) exp(-|t| / tau_c) over [x - w/2, x + w/2]
    def prim(u):
        return np.sign(u) * tau_c * (1.0 - np.exp(-np.abs(u) / tau_c))

    return 1.0 - (1.0 - g0) * (prim(x + width / 2) - prim(x - width / 2)) / width


def fit_g2_cw(hist: CorrelationHistogram) -> G2Result:
    """Least-squares fit of 1 - (1 - g0) exp(-|tau| / tau_c) to a cw histogram.

    The model is averaged over each bin before comparison with the counts.
    The quoted sigma combines the fit covariance with the Poisson error of
    the tail normalization.
    """
    if hist.empty or not hist.normalization > 0:
        raise StatisticsError("empty histogram: no coincidences to fit")
    w = hist.config.bin_width_ns
    x, y = hist.bin_centers, hist.g2
    sig = np.sqrt(np.maximum(hist.counts, 1)) / hist.normalization
    center = np.abs(x) < 1.0
    g_guess = float(np.clip(y[center].mean(), 0.0, 1.5))

    def model(x, g0, tau_c):
        return _binned_dip(x, g0, tau_c, w)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", OptimizeWarning)
        try:
            popt, pcov = curve_fit(model, x, y, p0=(g_guess, 1.0), sigma=sig, absolute_sigma=True,
                                   bounds=([0.0, 1e-3], [3.0, hist.config.window_ns]), maxfev=20000)
        except RuntimeError as exc:
            raise FitError(f"cw g2 fit did not converge: {exc}") from exc
    resid = (y - model(x, *popt)) / sig
    chi2 = float(np.sum(resid**2))
    if not np.all(np.isfinite(popt)):
        raise FitError(f"cw g2 fit returned non-finite parameters (chi2 = {chi2:.3g})")
    perr = np.sqrt(np.diag(pcov)) if np.all(np.isfinite(pcov)) else np.array([math.nan, math.nan])
    tail = np.abs(x) >= hist.config.tail_start_ns
    norm_rel = 1.0 / math.sqrt(max(hist.counts[tail].sum(), 1))
    g0 = float(popt[0])
    if not math.isfinite(perr[0]):
        perr[0] = float(np.sqrt(max(hist.counts[center].sum(), 1))) / (hist.normalization * center.sum())
    sigma = math.hypot(perr[0], g0 * norm_rel)
    return G2Result(g0, sigma, "fit", {
        "dip_depth": 1.0 - g0,
        "tau_c_ns": float(popt[1]),
        "tau_c_sigma_ns": float(perr[1]),
        "chi2_per_dof": chi2 / max(len(x) - 2, 1),
        "n_coincidences": int(hist.counts.sum()),
    })


def pulsed_g2(hist: CorrelationHistogram, period_ns: float, min_side_peaks: int = 4) -> G2Result:
    """Centre-peak area over the mean side-peak area."""
    if not period_ns > 0:
        raise ConfigurationError("period must be positive")
    areas = _peak_areas(hist, period_ns)
    side = {m: a for m, a in areas.items() if m != 0}
    if len(side) < min_side_peaks:
        raise StatisticsError(
            f"only {len(side)} side peaks fit in the +-{hist.config.window_ns} ns window; "
            f"need at least {min_side_peaks}"
        )
    side_sum = sum(side.values())
    side_mean = side_sum / len(side)
    if side_mean <= 0:
        raise StatisticsError("side peaks are empty")
    center = areas[0]
    g0 = center / side_mean
    if center > 0:
        sigma = g0 * math.sqrt(1.0 / center + 1.0 / side_sum)
    else:
        sigma = 1.0 / side_mean
    params = {"center_area": center, "side_area_mean": side_mean, "n_side_peaks": len(side)}
    return G2Result(g0, sigma, "peak-area", params)


def background_admixture_g2(g2_source: float, rho: float) -> float:
    """g2(0) after mixing with uncorrelated Poissonian light; rho = S / (S + B)."""
    if g2_source < 0:
        raise ValueError("g2_source must be >= 0")
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    # written so both limits rho = 0 and rho = 1 are exact
    return rho**2 * g2_source + (1.0 - rho**2)


def background_corrected_g2(g2_measured: float, rho: float) -> float:
    """Invert the admixture relation to recover the source g2(0)."""
    if not 0.0 < rho <= 1.0:
        raise ValueError("rho must lie in (0, 1]")
    return 1.0 + (g2_measured - 1.0) / rho**2


def rho_from_sbr(sbr: float) -> float:
    return 1.0 if math.isinf(sbr) else sbr / (1.0 + sbr)


# -- lifetime -----------------------------------------------------------------

def decay_histogram(time_ns, period_ns: float, bin_ns: float, offset_ns: float = 0.0):
    """Histogram of detection delays after the most recent excitation pulse."""
    t = _times(time_ns)
    delay = np.mod(t - offset_ns, period_ns)
    n_bins = int(round(period_ns / bin_ns))
    counts, edges = np.histogram(delay, bins=n_bins, range=(0.0, n_bins * bin_ns))
    return 0.5 * (edges[1:] + edges[:-1]), counts


@dataclass(frozen=True)
class LifetimeResult:
    t_fast_ns: float
    t_slow_ns: float
    fast_fraction: float
    t_fast_sigma_ns: float
    t_slow_sigma_ns: float
    degenerate: bool = False

    def to_record(self, prefix: str = "lifetime") -> str:
        return "\n".join([
            f"{prefix}.t_fast_ns = {self.t_fast_ns:.6f}",
            f"{prefix}.t_fast_sigma_ns = {self.t_fast_sigma_ns:.6f}",
            f"{prefix}.t_slow_ns = {self.t_slow_ns:.6f}",
            f"{prefix}.t_slow_sigma_ns = {self.t_slow_sigma_ns:.6f}",
            f"{prefix}.fast_fraction = {self.fast_fraction:.6f}",
            f"{prefix}.degenerate = {self.degenerate}",
        ])


def _exp_shape(t, tau, period):
    s = np.exp(-t / tau) / tau
    if period:
        s = s / (1.0 - math.exp(-period / tau))
    return s


def fit_lifetime(bin_centers, counts, period_ns: float | None = None, fit_start_ns: float | None = None,
                 bin_ns: float | None = None) -> LifetimeResult:
    """Biexponential least-squares fit of a TCSPC decay histogram.

    With ``period_ns`` set the model includes the pile-up of tails from
    earlier pulses.  Fitting starts ``fit_start_ns`` after the excitation
    (default: 0.5 ns after the histogram maximum) to stay clear of the
    instrument response.  A single-exponential decay is reported with
    ``degenerate=True`` and ``t_slow_ns = nan``.
    """
    x = np.asarray(bin_centers, dtype=float)
    y = np.asarray(counts, dtype=float)
    if y.sum() < 100:
        raise StatisticsError("fewer than 100 counts in the decay histogram")
    width = bin_ns if bin_ns is not None else float(x[1] - x[0])
    start = float(x[np.argmax(y)] + 0.5) if fit_start_ns is None else fit_start_ns
    m = x >= start
    x, y = x[m], y[m]
    sig = np.sqrt(np.maximum(y, 1.0))
    total = y.sum()

    def biexp(t, n, tf, ts, f, c):
        return n * width * (f * _exp_shape(t, tf, period_ns) + (1 - f) * _exp_shape(t, ts, period_ns)) + c

    def monoexp(t, n, tau, c):
        return n * width * _exp_shape(t, tau, period_ns) + c

    best = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", OptimizeWarning)
        for tf0, ts0 in ((0.5, 5.0), (1.0, 10.0), (2.0, 20.0)):
            try:
                popt, pcov = curve_fit(biexp, x, y, p0=(total * 2, tf0, ts0, 0.8, 0.0), sigma=sig,
                                       bounds=([0, 1e-3, 1e-3, 0, 0], [np.inf, 1e3, 1e3, 1, np.inf]),
                                       maxfev=20000)
            except RuntimeError:
                continue
            chi2 = float(np.sum(((y - biexp(x, *popt)) / sig) ** 2))
            if best is None or chi2 < best[0]:
                best = (chi2, popt, pcov)

    if best is not None:
        _, popt, pcov = best
        n, tf, ts, f, c = popt
        if tf > ts:
            tf, ts, f = ts, tf, 1 - f
            pcov = pcov[[0, 2, 1, 3, 4]][:, [0, 2, 1, 3, 4]]
        err = np.sqrt(np.abs(np.diag(pcov)))
        weak = min(f, 1 - f) < 0.01 or min(f, 1 - f) < 3 * err[3] or ts < 1.2 * tf
        if not weak:
            return LifetimeResult(float(tf), float(ts), float(f), float(err[1]), float(err[2]))

    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OptimizeWarning)
            popt, pcov = curve_fit(monoexp, x, y, p0=(total * 2, 1.0, 0.0), sigma=sig,
                                   bounds=([0, 1e-3, 0], [np.inf, 1e3, np.inf]), maxfev=20000)
    except RuntimeError as exc:
        raise FitError(f"lifetime fit did not converge: {exc}") from exc
    err = np.sqrt(np.abs(np.diag(pcov)))
    return LifetimeResult(float(popt[1]), math.nan, 1.0, float(err[1]), math.nan, degenerate=True)
