"""Scenario configuration, pipeline execution and calibration.

A scenario is one TOML file with a ``[scenario]`` block plus one block per
module (``qpm``, ``efficiency``, ``emitter``, ``chain``, ``hbt``, ``tcspc``,
``probe``, ``sweep``).  Unknown blocks or keys are errors.  All sub-seeds are
derived from ``scenario.seed`` with :func:`qfcsim.seeding.derive_seed`.

Long Monte Carlo runs are split into time shards of ``shard_duration_s``.
Each shard is generated and processed independently and the coincidence
histograms are added bin by bin.
"""

from __future__ import annotations

import contextlib
import copy
import dataclasses
import hashlib
import json
import math
import platform
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import scipy

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib
import tomli_w

from . import __version__, qpm
from .chain import (ChainParams, apply_spectral_filter, convert_stream, detect, detect_channels,
                    inject_background, sbr_monte_carlo, signal_to_background)
from .correlator import (CorrelationHistogram, G2Result, HbtConfig, LifetimeResult, background_corrected_g2,
                         correlate, decay_histogram, fit_g2_cw, fit_lifetime, pulsed_g2, split_stream)
from .errors import CalibrationError, ConfigurationError, ResourceError
from .seeding import derive_seed
from .source import EmitterParams, generate_stream, photon_rate_from_power

MANIFEST_SCHEMA_VERSION = 1
PRESETS = ("fig1b", "fig1c", "fig2", "fig3")
ANALYSES = ("bandwidth", "qpm_response", "tuning_curve", "sbr", "g2_pre", "g2_post", "lifetime")


@dataclass(frozen=True)
class QpmConfig:
    sellmeier: str = qpm.DEFAULT_SELLMEIER
    offset_visible: float = 0.0
    offset_signal: float = 0.0
    offset_pump: float = 0.0
    length_mm: float = 20.0
    signal_nm: float = 983.8
    pump_nm: float = 1550.0
    design_temperature_c: float = 58.8
    temperature_c: float | None = None
    poling_period_um: float | None = None

    def build(self):
        offsets = {k: v for k, v in (("visible", self.offset_visible), ("signal", self.offset_signal),
                                     ("pump", self.offset_pump)) if v}
        model = qpm.SellmeierModel.load(self.sellmeier, offsets)
        if self.poling_period_um is None:
            design = qpm.QpmDesign.from_design_point(self.signal_nm, self.pump_nm, self.design_temperature_c,
                                                     self.length_mm, model, self.temperature_c)
        else:
            design = qpm.QpmDesign(self.length_mm, self.poling_period_um,
                                   self.design_temperature_c if self.temperature_c is None else self.temperature_c,
                                   self.signal_nm, self.pump_nm, self.design_temperature_c)
        design.check(model)
        return model, design


@dataclass(frozen=True)
class TcspcConfig:
    rep_rate_mhz: float = 50.0
    emission_probability: float = 0.05
    duration_s: float = 1.0
    bin_ns: float = 0.064
    fit_start_ns: float | None = None


@dataclass(frozen=True)
class ProbeConfig:
    power_fw: float = 30.0
    wavelength_nm: float = 983.8
    photons_per_point: float = 1e6
    background_duration_s: float = 2000.0
    powers_mw: tuple = (25, 50, 100, 200, 300, 400, 500, 600, 700, 800, 900, 1000, 1200, 1400, 1600)
    low_power_mw: float = 50.0

    @property
    def photon_rate_hz(self) -> float:
        return photon_rate_from_power(self.power_fw * 1e-15, self.wavelength_nm)


@dataclass(frozen=True)
class SweepConfig:
    t_start_c: float = 25.0
    t_stop_c: float = 90.0
    t_step_c: float = 1.0
    response_half_width_nm: float = 1.0
    response_points: int = 401

    def temperatures(self):
        n = int(round((self.t_stop_c - self.t_start_c) / self.t_step_c)) + 1
        return np.round(np.linspace(self.t_start_c, self.t_stop_c, n), 6)


@dataclass(frozen=True)
class ScenarioBlock:
    name: str
    seed: int = 0
    duration_s: float = 0.1
    shard_duration_s: float = 0.05
    analyses: tuple = ()
    out_dir: str = "out"


_BLOCKS = {
    "scenario": ScenarioBlock,
    "qpm": QpmConfig,
    "efficiency": qpm.EfficiencyModel,
    "emitter": EmitterParams,
    "chain": ChainParams,
    "hbt": HbtConfig,
    "tcspc": TcspcConfig,
    "probe": ProbeConfig,
    "sweep": SweepConfig,
}
_CHAIN_HANDLES = {"efficiency", "design", "sellmeier", "raman_reference_power_mw"}


def _allowed_keys(block):
    names = {f.name for f in dataclasses.fields(_BLOCKS[block])}
    return names - _CHAIN_HANDLES if block == "chain" else names


def _build_block(block, values, **extra):
    cls = _BLOCKS[block]
    kwargs = {}
    for k, v in values.items():
        kwargs[k] = tuple(v) if isinstance(v, list) else v
    try:
        return cls(**kwargs, **extra)
    except TypeError as exc:
        raise ConfigurationError(f"[{block}]: {exc}") from None


@dataclass(frozen=True, eq=False)
class Scenario:
    raw: dict
    meta: ScenarioBlock
    sellmeier: qpm.SellmeierModel
    design: qpm.QpmDesign
    efficiency: qpm.EfficiencyModel
    chain: ChainParams
    hbt: HbtConfig | None
    emitter: EmitterParams | None
    tcspc: TcspcConfig
    probe: ProbeConfig
    sweep: SweepConfig

    @classmethod
    def from_dict(cls, raw: dict) -> "Scenario":
        raw = copy.deepcopy(raw)
        problems = []
        for block, values in raw.items():
            if block not in _BLOCKS:
                problems.append(f"unknown block [{block}]")
                continue
            if not isinstance(values, dict):
                problems.append(f"[{block}] must be a table")
                continue
            for key in sorted(set(values) - _allowed_keys(block)):
                problems.append(f"unknown key {block}.{key}")
        if "scenario" not in raw or "name" not in raw.get("scenario", {}):
            problems.append("missing scenario.name")
        if problems:
            raise ConfigurationError("; ".join(problems))
        meta = _build_block("scenario", raw["scenario"])
        bad = set(meta.analyses) - set(ANALYSES)
        if bad:
            raise ConfigurationError(f"unknown scenario.analyses {sorted(bad)}; choose from {ANALYSES}")
        qcfg = _build_block("qpm", raw.get("qpm", {}))
        model, design = qcfg.build()
        eff = _build_block("efficiency", raw.get("efficiency", {}))
        chain_values = dict(raw.get("chain", {}))
        emitter = _build_block("emitter", raw["emitter"]) if "emitter" in raw else None
        if emitter is not None and "filter_center_nm" not in chain_values:
            chain_values["filter_center_nm"] = emitter.qd_wavelength_nm
        chain = _build_block("chain", chain_values, efficiency=eff, design=design, sellmeier=model)
        hbt = None
        if "hbt" in raw or emitter is not None:
            hbt_values = dict(raw.get("hbt", {}))
            if emitter is not None:
                hbt_values.setdefault("mode", emitter.mode)
                if emitter.mode == "pulsed":
                    hbt_values.setdefault("period_ns", emitter.period_ns)
            hbt = _build_block("hbt", hbt_values)
        needs_emitter = {"g2_pre", "g2_post", "lifetime"} & set(meta.analyses)
        if needs_emitter and emitter is None:
            raise ConfigurationError(f"analyses {sorted(needs_emitter)} need an [emitter] block")
        return cls(raw, meta, model, design, eff, chain, hbt, emitter,
                   _build_block("tcspc", raw.get("tcspc", {})), _build_block("probe", raw.get("probe", {})),
                   _build_block("sweep", raw.get("sweep", {})))

    def config_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.raw, sort_keys=True).encode()).hexdigest()

    def with_value(self, path: str, value) -> "Scenario":
        block, _, key = path.partition(".")
        raw = copy.deepcopy(self.raw)
        raw.setdefault(block, {})[key] = value
        return Scenario.from_dict(raw)

    def value(self, path: str):
        block, _, key = path.partition(".")
        try:
            return self.raw[block][key]
        except KeyError:
            built = {"scenario": self.meta, "efficiency": self.efficiency, "emitter": self.emitter,
                     "chain": self.chain, "hbt": self.hbt, "tcspc": self.tcspc, "probe": self.probe,
                     "sweep": self.sweep}.get(block)
            if built is None or not hasattr(built, key):
                raise ConfigurationError(f"unknown parameter path {path!r}") from None
            return getattr(built, key)

    def scaled(self, factor: float) -> "Scenario":
        """Shrink every event count / duration by ``factor`` (reduced-scale CI mode)."""
        raw = copy.deepcopy(self.raw)
        raw["scenario"]["duration_s"] = self.meta.duration_s * factor
        raw["scenario"]["shard_duration_s"] = min(self.meta.shard_duration_s, self.meta.duration_s * factor)
        raw.setdefault("tcspc", {})["duration_s"] = self.tcspc.duration_s * factor
        probe = raw.setdefault("probe", {})
        probe["photons_per_point"] = self.probe.photons_per_point * factor
        probe["background_duration_s"] = self.probe.background_duration_s * factor
        return Scenario.from_dict(raw)


def load_scenario(path) -> Scenario:
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigurationError(f"{path}: {exc}") from None
    return Scenario.from_dict(raw)


def preset_path(name: str):
    if name not in PRESETS:
        raise ConfigurationError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    return resources.files("qfcsim.presets").joinpath(f"{name}.toml")


def load_preset(name: str) -> Scenario:
    with preset_path(name).open("rb") as fh:
        return Scenario.from_dict(tomllib.load(fh))


def dump_config(raw: dict) -> str:
    return tomli_w.dumps(raw)


# -- pipelines ----------------------------------------------------------------


@dataclass
class G2Run:
    pre: CorrelationHistogram | None = None
    post: CorrelationHistogram | None = None
    rates: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)


def _shards(duration, shard):
    n = max(1, int(math.ceil(duration / shard - 1e-9)))
    return [duration / n] * n


def _g2_value(hist, sc: Scenario) -> G2Result:
    if sc.hbt.mode == "cw":
        return fit_g2_cw(hist)
    return pulsed_g2(hist, sc.hbt.period_ns)


def run_g2(sc: Scenario, pre: bool = True, post: bool = True) -> G2Run:
    """Source -> Bragg filter -> [convert -> background] -> beamsplitter -> detectors -> correlator.

    The pre- and post-conversion branches share the filtered source photons
    of each shard; their downstream randomness is independent.
    """
    em, ch, hbt = sc.emitter, sc.chain, sc.hbt
    master = sc.meta.seed
    seeds = {s: derive_seed(master, "g2", s)
             for s in ("source", "filter", "split_pre", "detect_pre", "convert", "background",
                       "split_post", "detect_post")}
    run = G2Run(seeds=seeds)
    n_det = {"pre": 0, "post": 0}
    total = 0.0
    for i, dur in enumerate(_shards(sc.meta.duration_s, sc.meta.shard_duration_s)):
        stream = generate_stream(em, dur, derive_seed(seeds["source"], i))
        stream = apply_spectral_filter(stream, ch.signal_nm, ch.filter_fwhm_nm, ch.filter_peak,
                                       derive_seed(seeds["filter"], i))
        total += dur
        if pre:
            a, b = split_stream(stream, hbt.splitter_ratio, derive_seed(seeds["split_pre"], i))
            det = detect_channels((a, b), ch, derive_seed(seeds["detect_pre"], i))
            h = correlate(det.channels[0], det.channels[1], hbt)
            run.pre = h if run.pre is None else run.pre + h
            n_det["pre"] += len(det.channels[0]) + len(det.channels[1])
        if post:
            conv = convert_stream(stream, ch, derive_seed(seeds["convert"], i))
            conv = inject_background(conv, ch, dur, derive_seed(seeds["background"], i))
            a, b = split_stream(conv, hbt.splitter_ratio, derive_seed(seeds["split_post"], i))
            det = detect_channels((a, b), ch, derive_seed(seeds["detect_post"], i), fiber_coupled=True)
            h = correlate(det.channels[0], det.channels[1], hbt)
            run.post = h if run.post is None else run.post + h
            n_det["post"] += len(det.channels[0]) + len(det.channels[1])
    run.rates = {k: v / (2 * total) for k, v in n_det.items()}
    return run


def post_signal_fraction(sc: Scenario, detected_rate_hz: float) -> float:
    """Estimated S / (S + B) at a post-conversion detector, averaged over both channels."""
    ch = sc.chain
    eff = ch.detector_qe * (ch.fiber_coupling or 1.0)
    background = ch.background_rate_hz() * eff * 0.5 + ch.dark_rate_hz
    if detected_rate_hz <= 0:
        return math.nan
    return float(np.clip((detected_rate_hz - background) / detected_rate_hz, 0.0, 1.0))


def run_lifetime(sc: Scenario):
    """TCSPC decay of the filtered emission under pulsed excitation."""
    tc = sc.tcspc
    em = dataclasses.replace(sc.emitter, mode="pulsed", rep_rate_mhz=tc.rep_rate_mhz,
                             emission_probability=tc.emission_probability)
    seeds = {s: derive_seed(sc.meta.seed, "lifetime", s) for s in ("source", "filter", "detect")}
    counts = None
    for i, dur in enumerate(_shards(tc.duration_s, sc.meta.shard_duration_s)):
        s = generate_stream(em, dur, derive_seed(seeds["source"], i))
        s = apply_spectral_filter(s, sc.chain.signal_nm, sc.chain.filter_fwhm_nm, sc.chain.filter_peak,
                                  derive_seed(seeds["filter"], i))
        det = detect(s, sc.chain, derive_seed(seeds["detect"], i))
        centers, c = decay_histogram(det.channels[0], em.period_ns, tc.bin_ns, offset_ns=em.period_ns / 2)
        counts = c if counts is None else counts + c
    fit = fit_lifetime(centers, counts, period_ns=em.period_ns, fit_start_ns=tc.fit_start_ns, bin_ns=tc.bin_ns)
    return centers, counts, fit, seeds


# -- output bundle --------------------------------------------------------------


@contextlib.contextmanager
def _stage(name):
    try:
        yield
    except ResourceError as exc:
        raise ResourceError(f"stage {name}: {exc}") from exc


@dataclass
class RunResult:
    out_dir: Path
    summary: dict
    files: dict
    g2: dict = field(default_factory=dict)
    histograms: dict = field(default_factory=dict)
    lifetime: LifetimeResult | None = None
    sbr: list = field(default_factory=list)
    sbr_mc: list = field(default_factory=list)
    tuning: list = field(default_factory=list)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _csv(header, rows):
    lines = [",".join(header)]
    lines += [",".join(_fmt(float(x)) for x in row) for row in rows]
    return "\n".join(lines) + "\n"


def run_scenario(sc: Scenario, out_dir=None) -> RunResult:
    """Execute every analysis the scenario declares and write the output bundle."""
    out = Path(out_dir if out_dir is not None else sc.meta.out_dir) / sc.meta.name
    out.mkdir(parents=True, exist_ok=True)
    files: dict[str, str] = {}
    summary: dict[str, object] = {"scenario": sc.meta.name, "seed": sc.meta.seed}
    seeds: dict[str, int] = {}
    result = RunResult(out, summary, files)
    analyses = set(sc.meta.analyses)
    d, model = sc.design, sc.sellmeier

    summary["qpm.poling_period_um"] = d.poling_period_um
    if "bandwidth" in analyses:
        summary["qpm.acceptance_fwhm_nm"] = qpm.acceptance_bandwidth_signal(d, model)
    if "qpm_response" in analyses:
        sw = sc.sweep
        lam = np.linspace(d.signal_nm - sw.response_half_width_nm, d.signal_nm + sw.response_half_width_nm,
                          sw.response_points)
        resp = qpm.response_vs_signal(lam, d, model)
        files["qpm_response.csv"] = _csv(["signal_wavelength_nm", "response"], zip(lam, resp))
    if "tuning_curve" in analyses:
        pts = qpm.tuning_curve(sc.sweep.temperatures(), d, model)
        result.tuning = pts
        files["tuning_curve.csv"] = _csv(["temperature_C", "output_wavelength_nm"], pts)
        summary["tuning.span_nm"] = abs(pts[-1][1] - pts[0][1])
        summary["tuning.t_range_C"] = f"{pts[0][0]}-{pts[-1][0]}"

    if "sbr" in analyses:
        pr, ch = sc.probe, sc.chain
        rate = pr.photon_rate_hz
        eta_int, eta_ext = ch.efficiencies()
        summary["efficiency.eta_int_op"] = eta_int
        summary["efficiency.eta_ext_op"] = eta_ext
        summary["efficiency.peak_power_mW"] = sc.efficiency.peak_power_mw
        summary["probe.photon_rate_hz"] = rate
        result.sbr = signal_to_background(ch, pr.powers_mw, rate)
        files["sbr.csv"] = _csv(["pump_power_mW", "SBR", "eta_ext"], [(p.power_mw, p.sbr, p.eta_ext)
                                                                      for p in result.sbr])
        seeds["sbr"] = derive_seed(sc.meta.seed, "sbr")
        with _stage("sbr"):
            result.sbr_mc = sbr_monte_carlo(ch, pr.powers_mw, rate, pr.wavelength_nm, pr.photons_per_point,
                                            pr.background_duration_s, seeds["sbr"])
        files["sbr_mc.csv"] = _csv(["pump_power_mW", "SBR", "eta_ext"], [(p.power_mw, p.sbr, p.eta_ext)
                                                                         for p in result.sbr_mc])
        by_p = {p.power_mw: p for p in result.sbr_mc}
        for label, p in (("low", pr.low_power_mw), ("op", ch.pump_power_mw)):
            if float(p) in by_p:
                summary[f"sbr_mc.{label}_power_mW"] = float(p)
                summary[f"sbr_mc.{label}"] = by_p[float(p)].sbr
                summary[f"sbr_mc.{label}_sigma"] = by_p[float(p)].sbr_sigma
                summary[f"sbr_mc.{label}_eta_ext"] = by_p[float(p)].eta_ext

    if {"g2_pre", "g2_post"} & analyses:
        with _stage("g2"):
            run = run_g2(sc, pre="g2_pre" in analyses, post="g2_post" in analyses)
        seeds.update({f"g2.{k}": v for k, v in run.seeds.items()})
        for label, hist in (("pre", run.pre), ("post", run.post)):
            if hist is None:
                continue
            files[f"hist_{label}.csv"] = hist.to_csv()
            result.histograms[label] = hist
            res = _g2_value(hist, sc)
            params = dict(res.params)
            params["detected_rate_hz"] = run.rates[label]
            if label == "post":
                rho = post_signal_fraction(sc, run.rates[label])
                params["signal_fraction"] = rho
                if rho > 0:
                    params["g2_0_background_corrected"] = background_corrected_g2(res.g2_0, rho)
            res = G2Result(res.g2_0, res.sigma, res.method, params)
            result.g2[label] = res
            summary[f"g2_{label}"] = res

    if "lifetime" in analyses:
        with _stage("lifetime"):
            centers, counts, fit, lseeds = run_lifetime(sc)
        seeds.update({f"lifetime.{k}": v for k, v in lseeds.items()})
        result.lifetime = fit
        files["decay.csv"] = _csv(["delay_ns", "counts"], zip(centers, counts))
        summary["lifetime"] = fit

    lines = []
    for k, v in summary.items():
        if isinstance(v, G2Result):
            lines.append(v.to_record(k))
        elif isinstance(v, LifetimeResult):
            lines.append(v.to_record(k))
        else:
            lines.append(f"{k} = {_fmt(v)}")
    files["summary.txt"] = "\n".join(lines) + "\n"

    for name, text in files.items():
        (out / name).write_text(text)
    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "scenario": sc.meta.name,
        "config_sha256": sc.config_hash(),
        "master_seed": sc.meta.seed,
        "seeds": seeds,
        "versions": {"qfcsim": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "files": {name: hashlib.sha256(text.encode()).hexdigest() for name, text in sorted(files.items())},
    }
    text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    (out / "manifest.json").write_text(text)
    (out / "config.toml").write_text(dump_config(sc.raw))
    files["manifest.json"] = text
    return result


# -- calibration ----------------------------------------------------------------

TARGETS = ("g2_pre", "SBR_at_P", "eta_ext_at_P", "lifetime")


def observe(sc: Scenario, target: str, power_mw: float | None = None):
    """Monte Carlo estimate (value, sigma) of a calibration observable."""
    if target == "g2_pre":
        res = _g2_value(run_g2(sc, pre=True, post=False).pre, sc)
        return res.g2_0, res.sigma
    if target in ("SBR_at_P", "eta_ext_at_P"):
        p = power_mw if power_mw is not None else (sc.probe.low_power_mw if target == "SBR_at_P"
                                                   else sc.chain.pump_power_mw)
        pt = sbr_monte_carlo(sc.chain, [p], sc.probe.photon_rate_hz, sc.probe.wavelength_nm,
                             sc.probe.photons_per_point, sc.probe.background_duration_s,
                             derive_seed(sc.meta.seed, "calibrate", target))[0]
        if target == "SBR_at_P":
            return pt.sbr, pt.sbr_sigma
        n = sc.probe.photons_per_point * sc.chain.detector_qe
        return pt.eta_ext, math.sqrt(max(pt.eta_ext, 1e-12) / n)
    if target == "lifetime":
        fit = run_lifetime(sc)[2]
        return fit.t_fast_ns, fit.t_fast_sigma_ns
    raise ConfigurationError(f"unknown calibration target {target!r}; choose from {TARGETS}")


@dataclass
class CalibrationResult:
    scenario: Scenario
    knob: str
    value: float
    observed: float
    sigma: float
    history: list

    def report(self) -> str:
        lines = [f"knob = {self.knob}", f"value = {self.value!r}", f"observed = {self.observed!r}",
                 f"observed_sigma = {self.sigma!r}", "history = knob_value, observed, sigma"]
        lines += [f"  {k!r}, {o!r}, {s!r}" for k, o, s in self.history]
        return "\n".join(lines) + "\n"


def calibrate(sc: Scenario, target: str, knob: str, goal: float, tol: float, bounds=None,
              power_mw: float | None = None, max_iter: int = 40) -> CalibrationResult:
    """Bisect a scalar knob until the Monte Carlo observable is within ``tol`` of ``goal``.

    All evaluations reuse the scenario seed, so the observable is a
    deterministic function of the knob (common random numbers).  The result
    reports the statistical sigma of the final estimate.
    """
    if target not in TARGETS:
        raise ConfigurationError(f"unknown calibration target {target!r}; choose from {TARGETS}")
    current = sc.value(knob)
    if isinstance(current, bool) or not isinstance(current, (int, float)):
        raise ConfigurationError(f"knob {knob!r} is not a scalar parameter")
    if bounds is None:
        if current == 0:
            raise ConfigurationError(f"knob {knob!r} is 0; give explicit bounds")
        bounds = (current / 4, current * 4)
    lo, hi = sorted(float(b) for b in bounds)
    history = []

    def evaluate(x):
        s = sc.with_value(knob, float(x))
        v, e = observe(s, target, power_mw)
        history.append((float(x), float(v), float(e)))
        return s, v - goal, v, e

    s_lo, f_lo, v_lo, e_lo = evaluate(lo)
    s_hi, f_hi, v_hi, e_hi = evaluate(hi)
    for s, f, v, e, x in ((s_lo, f_lo, v_lo, e_lo, lo), (s_hi, f_hi, v_hi, e_hi, hi)):
        if abs(f) <= tol:
            return CalibrationResult(s, knob, x, v, e, history)
    if f_lo * f_hi > 0:
        raise CalibrationError(
            f"{target} = {goal} not bracketed by {knob} in [{lo}, {hi}]: observed {v_lo:.6g} and {v_hi:.6g}"
        )
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        s, f, v, e = evaluate(mid)
        if abs(f) <= tol:
            return CalibrationResult(s, knob, mid, v, e, history)
        if f * f_lo > 0:
            lo, f_lo = mid, f
        else:
            hi = mid
    raise CalibrationError(f"{target} did not reach {goal} +- {tol} after {max_iter} bisection steps")
