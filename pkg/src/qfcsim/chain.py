"""Spectral filtering, frequency conversion, background injection and detection.

All operations take an immutable :class:`PhotonStream` and return a new one
(or a :class:`DetectedStream`).  Each call owns an RNG built from its
``seed`` argument.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import NamedTuple

import numba
import numpy as np

from . import qpm
from .errors import ConfigurationError
from .seeding import derive_seed
from .source import Origin, PhotonStream, merge_streams, poisson_stream


def _reference_design():
    return qpm.QpmDesign.from_design_point(983.8, 1550.0, 58.8, 20.0, qpm.SellmeierModel.load())


@dataclass(frozen=True)
class ChainParams:
    """Losses, noise and detector parameters of the conversion/detection chain.

    ``raman_beta`` is the rate (1/s per mW of WDM pump power) of converted
    Raman noise photons reaching the detector at the reference pump power.
    ``fiber_coupling`` is an extra transmission in front of the post-conversion
    HBT detectors; ``None`` means free-space coupling.
    """

    filter_center_nm: float | None = None
    filter_fwhm_nm: float = 0.2
    filter_peak: float = 0.60
    pump_power_mw: float = 800.0
    pump_wavelength_nm: float | None = None
    raman_beta: float = 0.0
    raman_reference_power_mw: float | None = None
    detector_qe: float = 0.67
    dark_rate_hz: float = 50.0
    dead_time_ns: float = 50.0
    jitter_ps: float = 350.0
    fiber_coupling: float | None = None
    efficiency: qpm.EfficiencyModel = field(default_factory=qpm.EfficiencyModel)
    design: qpm.QpmDesign = field(default_factory=_reference_design)
    sellmeier: qpm.SellmeierModel = field(default_factory=qpm.SellmeierModel.load)

    def __post_init__(self):
        problems = []
        for name in ("filter_peak", "detector_qe"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                problems.append(f"{name} must lie in [0, 1], got {v}")
        if self.fiber_coupling is not None and not 0.0 <= self.fiber_coupling <= 1.0:
            problems.append(f"fiber_coupling must lie in [0, 1], got {self.fiber_coupling}")
        if not self.filter_fwhm_nm > 0:
            problems.append(f"filter_fwhm_nm must be positive, got {self.filter_fwhm_nm}")
        for name in ("pump_power_mw", "raman_beta", "dark_rate_hz", "dead_time_ns", "jitter_ps"):
            if getattr(self, name) < 0:
                problems.append(f"{name} must be >= 0, got {getattr(self, name)}")
        if problems:
            raise ConfigurationError("; ".join(f"chain.{p}" for p in problems))

    @property
    def signal_nm(self) -> float:
        return self.design.signal_nm if self.filter_center_nm is None else self.filter_center_nm

    @cached_property
    def pump_nm(self) -> float:
        """Pump wavelength; phase matched to the filter centre when not given."""
        if self.pump_wavelength_nm is not None:
            return self.pump_wavelength_nm
        if self.signal_nm == self.design.signal_nm and self.design.temperature_c == self.design.design_temperature_c:
            return self.design.pump_nm
        return qpm.phase_matched_pump(self.signal_nm, self.design.temperature_c, self.design, self.sellmeier)

    @property
    def output_nm(self) -> float:
        return qpm.sfg_output_wavelength(self.signal_nm, self.pump_nm)

    @property
    def reference_power_mw(self) -> float:
        return self.pump_power_mw if self.raman_reference_power_mw is None else self.raman_reference_power_mw

    def efficiencies(self):
        return qpm.conversion_efficiency(self.pump_power_mw, self.efficiency)

    def background_rate_hz(self) -> float:
        """Converted Raman photon rate at the detector input."""
        if self.raman_beta == 0 or self.pump_power_mw == 0:
            return 0.0
        eta, _ = self.efficiencies()
        eta_ref, _ = qpm.conversion_efficiency(self.reference_power_mw, self.efficiency)
        return self.raman_beta * self.pump_power_mw * eta / eta_ref

    def at_power(self, pump_power_mw: float) -> "ChainParams":
        return replace(self, pump_power_mw=float(pump_power_mw), raman_reference_power_mw=self.reference_power_mw)


@dataclass(frozen=True, eq=False)
class DetectedStream:
    """Detection timestamps per channel.  ``origins`` is for diagnostics only."""

    channels: tuple
    origins: tuple
    duration_s: float
    seed: int | None = None

    def __post_init__(self):
        for a in self.channels + self.origins:
            a.setflags(write=False)

    def counts_by_origin(self, channel: int = 0) -> dict[str, int]:
        counts = np.bincount(self.origins[channel], minlength=len(Origin))
        return {o.name.lower(): int(counts[o]) for o in Origin}

    def rate_hz(self, channel: int = 0) -> float:
        return len(self.channels[channel]) / self.duration_s


def filter_transmission(wavelength_nm, center_nm, fwhm_nm, peak):
    d = np.asarray(wavelength_nm, dtype=float) - center_nm
    return peak * np.exp(-4 * math.log(2) * d**2 / fwhm_nm**2)


def apply_spectral_filter(stream: PhotonStream, center_nm: float, fwhm_nm: float, peak: float,
                          seed: int) -> PhotonStream:
    """Gaussian band-pass: each photon survives with the transmission at its wavelength."""
    rng = np.random.default_rng(seed)
    keep = rng.random(len(stream)) < filter_transmission(stream.wavelength_nm, center_nm, fwhm_nm, peak)
    return stream.select(keep, seed=seed)


def conversion_probability(wavelength_nm, chain: ChainParams):
    """Probability that an input photon leaves the converter as a sum-frequency photon."""
    eta_int, _ = chain.efficiencies()
    lam = np.asarray(wavelength_nm, dtype=float)
    if lam.size == 0:
        return np.empty(0)
    d = chain.design
    dk = qpm.phase_mismatch(lam, chain.pump_nm, d.temperature_c, d, chain.sellmeier)
    return chain.efficiency.linear_transmission * eta_int * qpm.qpm_response(dk, d.length_mm)


def convert_stream(stream: PhotonStream, chain: ChainParams, seed: int) -> PhotonStream:
    """Frequency convert a stream; survivors are remapped to the sum frequency."""
    rng = np.random.default_rng(seed)
    keep = rng.random(len(stream)) < conversion_probability(stream.wavelength_nm, chain)
    out = stream.select(keep, seed=seed)
    return out.with_wavelengths(qpm.sfg_output_wavelength(out.wavelength_nm, chain.pump_nm)
                                if len(out) else out.wavelength_nm)


def inject_background(stream: PhotonStream, chain: ChainParams, duration_s: float, seed: int) -> PhotonStream:
    """Merge in Poissonian converted Raman photons at the output wavelength."""
    if not duration_s > 0:
        raise ConfigurationError(f"duration must be positive, got {duration_s}")
    rate = chain.background_rate_hz()
    if rate == 0:
        return stream
    noise = poisson_stream(rate, chain.output_nm, duration_s, seed, Origin.RAMAN_NOISE)
    return merge_streams(stream, noise, duration_s=max(stream.duration_s, duration_s), seed=seed)


@numba.njit(cache=True)
def _dead_time_mask(t, dead):
    keep = np.zeros(t.shape[0], dtype=np.bool_)
    last = -np.inf
    for i in range(t.shape[0]):
        if t[i] - last >= dead:
            keep[i] = True
            last = t[i]
    return keep


def dead_time_mask(t, dead_time_ns):
    """Non-paralyzable dead time on a sorted timestamp array."""
    if dead_time_ns == 0 or len(t) == 0:
        return np.ones(len(t), bool)
    return _dead_time_mask(np.ascontiguousarray(t, dtype=np.float64), float(dead_time_ns))


def _detect_channel(time_ns, origin, chain, duration_s, rng, fiber_coupled):
    eff = chain.detector_qe
    if fiber_coupled and chain.fiber_coupling is not None:
        eff *= chain.fiber_coupling
    keep = rng.random(len(time_ns)) < eff
    t = time_ns[keep]
    o = origin[keep]
    n_dark = rng.poisson(chain.dark_rate_hz * duration_s)
    t = np.concatenate([t, rng.uniform(0.0, duration_s * 1e9, n_dark)])
    o = np.concatenate([o, np.full(n_dark, Origin.DARK, np.uint8)])
    if chain.jitter_ps > 0:
        t = t + rng.normal(0.0, chain.jitter_ps * 1e-3, len(t))
    order = np.argsort(t, kind="stable")
    t, o = t[order], o[order]
    m = dead_time_mask(t, chain.dead_time_ns)
    return t[m], o[m]


def detect(stream: PhotonStream, chain: ChainParams, seed: int, fiber_coupled: bool = False) -> DetectedStream:
    """Single-detector SPAD model: QE thinning, dark counts, jitter, dead time."""
    rng = np.random.default_rng(seed)
    t, o = _detect_channel(stream.time_ns, stream.origin, chain, stream.duration_s, rng, fiber_coupled)
    return DetectedStream((t,), (o,), stream.duration_s, seed)


def detect_channels(streams, chain: ChainParams, seed: int, fiber_coupled: bool = False) -> DetectedStream:
    """Independent detectors behind each output of a beamsplitter."""
    ts, os_ = [], []
    for i, s in enumerate(streams):
        rng = np.random.default_rng(derive_seed(seed, "channel", i))
        t, o = _detect_channel(s.time_ns, s.origin, chain, s.duration_s, rng, fiber_coupled)
        ts.append(t)
        os_.append(o)
    return DetectedStream(tuple(ts), tuple(os_), streams[0].duration_s, seed)


class SbrPoint(NamedTuple):
    power_mw: float
    sbr: float
    eta_ext: float
    defined: bool = True
    sbr_sigma: float = 0.0


def _ratio(signal, background):
    if background > 0:
        return signal / background, True
    if signal > 0:
        return math.inf, True
    return math.nan, False


def signal_to_background(chain: ChainParams, powers_mw, signal_rate_hz: float) -> list[SbrPoint]:
    """Expected SBR and external efficiency versus WDM pump power.

    Darks are excluded from the background, as after dark-count subtraction.
    """
    out = []
    for p in powers_mw:
        c = chain.at_power(p)
        _, eta_ext = c.efficiencies()
        s = signal_rate_hz * eta_ext * chain.detector_qe
        b = c.background_rate_hz() * chain.detector_qe
        sbr, ok = _ratio(s, b)
        out.append(SbrPoint(float(p), sbr, eta_ext, ok))
    return out


def sbr_monte_carlo(chain: ChainParams, powers_mw, signal_rate_hz: float, signal_wavelength_nm: float,
                    photons_per_point: float, background_duration_s: float, seed: int) -> list[SbrPoint]:
    """Monte Carlo SBR: count with and without the probe, subtract the dark rate.

    The external efficiency is inferred from the probe-induced counts divided
    by the probe flux and detector QE.
    """
    out = []
    for i, p in enumerate(powers_mw):
        c = chain.at_power(p)
        t_sig = photons_per_point / signal_rate_hz
        probe = poisson_stream(signal_rate_hz, signal_wavelength_nm, t_sig, derive_seed(seed, i, "probe"))
        sig = convert_stream(probe, c, derive_seed(seed, i, "convert"))
        sig = inject_background(sig, c, t_sig, derive_seed(seed, i, "noise_on"))
        n_on = len(detect(sig, c, derive_seed(seed, i, "detect_on")).channels[0])

        off = inject_background(PhotonStream.empty(background_duration_s), c, background_duration_s,
                                derive_seed(seed, i, "noise_off"))
        n_off = len(detect(off, c, derive_seed(seed, i, "detect_off")).channels[0])

        r_on, r_off = n_on / t_sig, n_off / background_duration_s
        s = r_on - r_off
        b = r_off - chain.dark_rate_hz
        sbr, ok = _ratio(s, b)
        var_s = n_on / t_sig**2 + n_off / background_duration_s**2
        var_b = n_off / background_duration_s**2
        sigma = abs(sbr) * math.sqrt(var_s / s**2 + var_b / b**2) if ok and s > 0 and b > 0 else math.nan
        out.append(SbrPoint(float(p), sbr, s / (signal_rate_hz * chain.detector_qe), ok, sigma))
    return out
