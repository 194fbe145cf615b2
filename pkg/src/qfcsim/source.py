"""Stochastic photon streams from a quantum-dot emitter.

Two excitation modes are supported:

* ``pulsed`` -- at most one QD photon per excitation cycle, delayed from the
  pulse by the biexponential decay law.
* ``cw`` -- QD photons form a renewal process (exponential re-excitation wait
  followed by the radiative decay), which gives antibunching with
  g2(0) = 0 and g2(inf) = 1.

Multi-photon contamination is admixed Poissonian light from a nearby cavity
mode.  It has a Lorentzian spectrum of FWHM lambda/Q centred on the cavity
wavelength, so a narrow spectral filter can discriminate it from the QD line.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass
from enum import IntEnum
from typing import NamedTuple

import numpy as np

from .errors import ConfigurationError, ResourceError


class Origin(IntEnum):
    QD = 0
    CONTAMINANT = 1
    RAMAN_NOISE = 2
    DARK = 3


class PhotonRecord(NamedTuple):
    timestamp_ns: float
    wavelength_nm: float
    origin: Origin


def _frozen(a, dtype):
    a = np.ascontiguousarray(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PhotonStream:
    """Time-ordered photons.  Arrays are read-only after construction."""

    time_ns: np.ndarray
    wavelength_nm: np.ndarray
    origin: np.ndarray
    duration_s: float
    seed: int | None = None
    params_hash: str = ""

    def __post_init__(self):
        object.__setattr__(self, "time_ns", _frozen(self.time_ns, np.float64))
        object.__setattr__(self, "wavelength_nm", _frozen(self.wavelength_nm, np.float64))
        object.__setattr__(self, "origin", _frozen(self.origin, np.uint8))
        n = len(self.time_ns)
        if len(self.wavelength_nm) != n or len(self.origin) != n:
            raise ValueError("time, wavelength and origin arrays differ in length")

    @classmethod
    def empty(cls, duration_s: float, seed=None, params_hash="") -> "PhotonStream":
        return cls(np.empty(0), np.empty(0), np.empty(0, np.uint8), duration_s, seed, params_hash)

    def __len__(self):
        return len(self.time_ns)

    def __getitem__(self, i) -> PhotonRecord:
        return PhotonRecord(float(self.time_ns[i]), float(self.wavelength_nm[i]), Origin(int(self.origin[i])))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def select(self, mask, **changes) -> "PhotonStream":
        fields = dict(
            time_ns=self.time_ns[mask],
            wavelength_nm=self.wavelength_nm[mask],
            origin=self.origin[mask],
            duration_s=self.duration_s,
            seed=self.seed,
            params_hash=self.params_hash,
        )
        fields.update(changes)
        return PhotonStream(**fields)

    def with_wavelengths(self, wavelength_nm, **changes) -> "PhotonStream":
        fields = dict(time_ns=self.time_ns, wavelength_nm=wavelength_nm, origin=self.origin,
                      duration_s=self.duration_s, seed=self.seed, params_hash=self.params_hash)
        fields.update(changes)
        return PhotonStream(**fields)

    def counts_by_origin(self) -> dict[str, int]:
        counts = np.bincount(self.origin, minlength=len(Origin))
        return {o.name.lower(): int(counts[o]) for o in Origin}

    def is_sorted(self) -> bool:
        return bool(np.all(np.diff(self.time_ns) >= 0))


def merge_streams(*streams: PhotonStream, **changes) -> PhotonStream:
    """Stable time-ordered merge of several streams."""
    t = np.concatenate([s.time_ns for s in streams])
    order = np.argsort(t, kind="stable")
    fields = dict(
        time_ns=t[order],
        wavelength_nm=np.concatenate([s.wavelength_nm for s in streams])[order],
        origin=np.concatenate([s.origin for s in streams])[order],
        duration_s=max(s.duration_s for s in streams),
        seed=streams[0].seed,
        params_hash=streams[0].params_hash,
    )
    fields.update(changes)
    return PhotonStream(**fields)


@dataclass(frozen=True)
class EmitterParams:
    """Phenomenological QD emitter plus an admixed cavity-mode contaminant.

    ``emission_probability`` is the probability per excitation cycle that a
    QD photon is emitted into the collection fiber (pulsed mode).  In cw mode
    ``pump_rate_per_ns`` sets the re-excitation rate and
    ``collection_efficiency`` the fraction of emitted photons that are kept.
    ``contaminant_ratio`` is the contaminant mean rate relative to the
    collected QD rate, before any spectral filtering.
    """

    mode: str = "pulsed"
    rep_rate_mhz: float = 50.0
    pulse_width_ps: float = 50.0
    t_fast_ns: float = 1.12
    t_slow_ns: float = 6.5
    fast_fraction: float = 0.9
    emission_probability: float = 0.5
    pump_rate_per_ns: float = 0.1
    collection_efficiency: float = 1.0
    qd_wavelength_nm: float = 970.2
    cavity_wavelength_nm: float = 969.8
    cavity_q: float = 12500.0
    contaminant_ratio: float = 0.0
    contaminant_span_nm: float = 2.0
    max_events: int = 50_000_000

    def __post_init__(self):
        problems = []
        if self.mode not in ("cw", "pulsed"):
            problems.append(f"mode must be 'cw' or 'pulsed', got {self.mode!r}")
        if not 0 < self.t_fast_ns < self.t_slow_ns:
            problems.append(f"need 0 < t_fast_ns < t_slow_ns, got {self.t_fast_ns}, {self.t_slow_ns}")
        for name in ("fast_fraction", "emission_probability", "collection_efficiency"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                problems.append(f"{name} must lie in [0, 1], got {v}")
        if self.collection_efficiency == 0:
            problems.append("collection_efficiency must be > 0")
        for name in ("rep_rate_mhz", "pump_rate_per_ns", "qd_wavelength_nm", "cavity_wavelength_nm",
                     "cavity_q", "contaminant_span_nm"):
            if not getattr(self, name) > 0:
                problems.append(f"{name} must be positive, got {getattr(self, name)}")
        if self.pulse_width_ps < 0:
            problems.append("pulse_width_ps must be >= 0")
        if self.contaminant_ratio < 0:
            problems.append(f"contaminant_ratio must be >= 0, got {self.contaminant_ratio}")
        if problems:
            raise ConfigurationError("; ".join(f"emitter.{p}" for p in problems))

    @property
    def period_ns(self) -> float:
        return 1e3 / self.rep_rate_mhz

    @property
    def cavity_linewidth_nm(self) -> float:
        return self.cavity_wavelength_nm / self.cavity_q

    @property
    def mean_decay_ns(self) -> float:
        return self.fast_fraction * self.t_fast_ns + (1 - self.fast_fraction) * self.t_slow_ns

    @property
    def qd_rate_hz(self) -> float:
        """Mean rate of collected QD photons."""
        if self.mode == "pulsed":
            return self.emission_probability * self.rep_rate_mhz * 1e6
        return 1e9 * self.collection_efficiency / (1.0 / self.pump_rate_per_ns + self.mean_decay_ns)

    def params_hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def pulse_time_ns(k, params: EmitterParams):
    """Excitation time of cycle ``k``; pulses sit mid-cycle so jitter never goes negative."""
    return (np.asarray(k, dtype=float) + 0.5) * params.period_ns


def sample_decay_delay(params: EmitterParams, rng: np.random.Generator, size=None):
    """Draw delays (ns) from f Exp(T_fast) + (1 - f) Exp(T_slow)."""
    fast = rng.random(size) < params.fast_fraction
    return np.where(fast, rng.exponential(params.t_fast_ns, size), rng.exponential(params.t_slow_ns, size))


def _contaminant_wavelengths(params: EmitterParams, rng, n):
    # Cauchy line truncated to +-span by inverse-CDF sampling
    hwhm = params.cavity_linewidth_nm / 2
    edge = math.atan(params.contaminant_span_nm / hwhm)
    u = rng.uniform(-edge, edge, n)
    return params.cavity_wavelength_nm + hwhm * np.tan(u)


def _check_budget(expected, params, what):
    if expected > params.max_events:
        raise ResourceError(
            f"{what}: about {expected:.3g} events expected, above the budget of "
            f"{params.max_events:.3g}; generate the stream in shorter chunks"
        )


def generate_pulsed_stream(params: EmitterParams, duration_s: float, seed: int) -> PhotonStream:
    """Photons from a pulsed emitter over ``duration_s`` seconds."""
    if params.mode != "pulsed":
        raise ConfigurationError("generate_pulsed_stream needs emitter.mode = 'pulsed'")
    if not duration_s > 0:
        raise ConfigurationError(f"duration must be positive, got {duration_s}")
    rng = np.random.default_rng(seed)
    n_cycles = int(duration_s * params.rep_rate_mhz * 1e6)
    p = params.emission_probability
    _check_budget(n_cycles * p * (1 + params.contaminant_ratio), params, "pulsed stream")
    sigma_pulse = params.pulse_width_ps * 1e-3 / (2 * math.sqrt(2 * math.log(2)))

    k_qd = np.flatnonzero(rng.random(n_cycles) < p)
    t_qd = pulse_time_ns(k_qd, params) + rng.normal(0.0, sigma_pulse, len(k_qd)) \
        + sample_decay_delay(params, rng, len(k_qd))

    n_c = rng.poisson(params.contaminant_ratio * p, n_cycles) if params.contaminant_ratio > 0 \
        else np.zeros(n_cycles, np.int64)
    k_c = np.repeat(np.arange(n_cycles), n_c)
    t_c = pulse_time_ns(k_c, params) + rng.normal(0.0, sigma_pulse, len(k_c)) \
        + sample_decay_delay(params, rng, len(k_c))
    lam_c = _contaminant_wavelengths(params, rng, len(k_c))

    return _assemble(t_qd, t_c, lam_c, params, duration_s, seed)


def _assemble(t_qd, t_c, lam_c, params, duration_s, seed):
    t = np.concatenate([t_qd, t_c])
    lam = np.concatenate([np.full(len(t_qd), params.qd_wavelength_nm), lam_c])
    origin = np.concatenate([np.full(len(t_qd), Origin.QD, np.uint8),
                             np.full(len(t_c), Origin.CONTAMINANT, np.uint8)])
    order = np.argsort(t, kind="stable")
    t, lam, origin = t[order], lam[order], origin[order]
    keep = t < duration_s * 1e9
    return PhotonStream(t[keep], lam[keep], origin[keep], duration_s, seed, params.params_hash())


def _renewal_times(params: EmitterParams, rng, horizon_ns):
    """Arrival times of collected photons of the thinned renewal process.

    Thinning a renewal process with keep probability eta gives another
    renewal process whose interval is a sum of K ~ Geometric(eta) original
    intervals.  The sum of K exponential waits is Gamma(K), and the decay
    part splits binomially into fast and slow Gamma sums.
    """
    eta = params.collection_efficiency
    mean_iv = (1.0 / params.pump_rate_per_ns + params.mean_decay_ns) / eta
    chunks = []
    t0 = 0.0
    while t0 < horizon_ns:
        n = int((horizon_ns - t0) / mean_iv * 1.02 + 6 * math.sqrt((horizon_ns - t0) / mean_iv) + 16)
        k = rng.geometric(eta, n) if eta < 1 else np.ones(n, np.int64)
        wait = rng.gamma(k, 1.0 / params.pump_rate_per_ns)
        k_fast = rng.binomial(k, params.fast_fraction)
        k_slow = k - k_fast
        decay = np.zeros(n)
        m = k_fast > 0
        decay[m] += rng.gamma(k_fast[m], params.t_fast_ns)
        m = k_slow > 0
        decay[m] += rng.gamma(k_slow[m], params.t_slow_ns)
        t = t0 + np.cumsum(wait + decay)
        chunks.append(t)
        t0 = t[-1]
    t = np.concatenate(chunks)
    return t[t < horizon_ns]


def generate_cw_stream(params: EmitterParams, duration_s: float, seed: int) -> PhotonStream:
    """Photons from a continuously pumped emitter over ``duration_s`` seconds."""
    if params.mode != "cw":
        raise ConfigurationError("generate_cw_stream needs emitter.mode = 'cw'")
    if not duration_s > 0:
        raise ConfigurationError(f"duration must be positive, got {duration_s}")
    rng = np.random.default_rng(seed)
    rate = params.qd_rate_hz
    _check_budget(rate * duration_s * (1 + params.contaminant_ratio), params, "cw stream")
    horizon = duration_s * 1e9
    t_qd = _renewal_times(params, rng, horizon)

    n_c = rng.poisson(params.contaminant_ratio * rate * duration_s)
    t_c = np.sort(rng.uniform(0.0, horizon, n_c))
    lam_c = _contaminant_wavelengths(params, rng, n_c)
    return _assemble(t_qd, t_c, lam_c, params, duration_s, seed)


def generate_stream(params: EmitterParams, duration_s: float, seed: int) -> PhotonStream:
    if params.mode == "pulsed":
        return generate_pulsed_stream(params, duration_s, seed)
    return generate_cw_stream(params, duration_s, seed)


def poisson_stream(rate_hz: float, wavelength_nm: float, duration_s: float, seed: int,
                   origin: Origin = Origin.QD) -> PhotonStream:
    """Homogeneous Poisson photons at one wavelength, e.g. an attenuated laser."""
    if rate_hz < 0 or not duration_s > 0:
        raise ConfigurationError("rate must be >= 0 and duration > 0")
    rng = np.random.default_rng(seed)
    n = rng.poisson(rate_hz * duration_s)
    t = np.sort(rng.uniform(0.0, duration_s * 1e9, n))
    return PhotonStream(t, np.full(n, float(wavelength_nm)), np.full(n, origin, np.uint8), duration_s, seed)


def photon_rate_from_power(power_w: float, wavelength_nm: float) -> float:
    """Photon flux (1/s) of a monochromatic beam."""
    h, c = 6.62607015e-34, 299792458.0
    return power_w * wavelength_nm * 1e-9 / (h * c)
