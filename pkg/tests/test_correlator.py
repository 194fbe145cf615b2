import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from qfcsim.chain import ChainParams, detect_channels
from qfcsim.correlator import (CorrelationHistogram, HbtConfig, background_admixture_g2, background_corrected_g2,
                               correlate, correlate_bruteforce, decay_histogram, fit_g2_cw, fit_lifetime, normalize,
                               pulsed_g2, rho_from_sbr, split_stream)
from qfcsim.errors import ConfigurationError, StatisticsError
from qfcsim.source import EmitterParams, Origin, generate_pulsed_stream, poisson_stream

CW = HbtConfig(mode="cw")
PULSED = HbtConfig(mode="pulsed", period_ns=20.0)


def test_config_invariants():
    with pytest.raises(ConfigurationError):
        HbtConfig(bin_width_ns=0)
    with pytest.raises(ConfigurationError):
        HbtConfig(window_ns=0.1)
    with pytest.raises(ConfigurationError):
        HbtConfig(splitter_ratio=1.0)
    with pytest.raises(ConfigurationError):
        HbtConfig(mode="pulsed")
    assert HbtConfig(mode="pulsed", period_ns=20).window_ns == 220.0
    assert CW.window_ns == 100.0


class TestSplit:
    s = poisson_stream(1e9, 980.0, 1e-3, 1)

    def test_binomial(self):
        a, b = split_stream(self.s, 0.5, 2)
        n = len(self.s)
        assert abs(len(a) - n / 2) < 3 * math.sqrt(n / 4)
        assert len(a) + len(b) == n

    def test_ratio_one(self):
        a, b = split_stream(self.s, 1.0, 3)
        assert len(a) == len(self.s) and len(b) == 0

    def test_exclusive(self):
        a, b = split_stream(self.s, 0.5, 4)
        assert len(np.intersect1d(a.time_ns, b.time_ns)) == 0
        assert a.is_sorted() and b.is_sorted()


@st.composite
def stream_pair(draw):
    n_a = draw(st.integers(0, 400))
    n_b = draw(st.integers(0, 400))
    span = draw(st.floats(10.0, 5000.0))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    a = np.sort(rng.uniform(0, span, n_a))
    b = np.sort(rng.uniform(0, span, n_b))
    # exact bin-edge delays and duplicates are the corner cases
    if n_a and n_b and draw(st.booleans()):
        b = np.sort(np.concatenate([b, a[: min(5, n_a)] + 0.128, a[: min(5, n_a)]]))
    return a, b


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(stream_pair(), st.sampled_from([0.05, 0.256, 1.0]), st.sampled_from([3.0, 20.0, 100.0]),
       st.sampled_from([7, 1000, 4_000_000]))
def test_sliding_window_equals_bruteforce(pair, bw, window, block):
    a, b = pair
    cfg = HbtConfig(bin_width_ns=bw, window_ns=window, tail_start_ns=window / 2)
    fast = correlate(a, b, cfg, max_pairs_per_block=block)
    slow = correlate_bruteforce(a, b, cfg)
    assert np.array_equal(fast.counts, slow.counts)


def test_empty_stream_flagged():
    h = correlate(np.array([]), np.array([1.0, 2.0]), CW)
    assert h.empty and h.counts.sum() == 0


def test_histogram_bins_uniform_and_centred():
    c = CW.bin_centers()
    assert c[CW.half_bins] == 0.0
    assert np.allclose(np.diff(c), CW.bin_width_ns)


def test_poisson_streams_flat():
    a = poisson_stream(2e7, 600.0, 0.05, 5)
    b = poisson_stream(2e7, 600.0, 0.05, 6)
    h = correlate(a, b, CW)
    expected = len(a) * len(b) * CW.bin_width_ns / (0.05e9)
    assert np.all(np.abs(h.counts - expected) < 4 * math.sqrt(expected))
    tail_total = h.counts[np.abs(h.bin_centers) >= 30].sum()
    assert np.all(np.abs(h.g2 - 1) < 4 / math.sqrt(h.normalization) + 4 / math.sqrt(tail_total))


def test_symmetry_of_split_autocorrelation():
    p = EmitterParams(mode="pulsed", emission_probability=0.5, contaminant_ratio=0.3)
    s = generate_pulsed_stream(p, 0.02, 7)
    a, b = split_stream(s, 0.5, 8)
    h = correlate(a, b, PULSED)
    k = PULSED.half_bins
    pos, neg = h.counts[k + 1:], h.counts[:k][::-1]
    z = (pos - neg) / np.sqrt(np.maximum(pos + neg, 1))
    assert abs(z.mean()) < 4 / math.sqrt(len(z))
    assert np.mean(z**2) < 1.3


def test_histograms_merge_additively():
    a = poisson_stream(1e7, 600.0, 0.01, 9)
    b = poisson_stream(1e7, 600.0, 0.01, 10)
    h = correlate(a, b, CW)
    merged = h + h
    assert np.array_equal(merged.counts, 2 * h.counts)
    assert merged.normalization == pytest.approx(2 * h.normalization)


def _synthetic_cw(g0, tau_c, counts_per_bin, seed):
    rng = np.random.default_rng(seed)
    x = CW.bin_centers()
    w = CW.bin_width_ns
    # exact bin average of the dip model
    prim = lambda u: np.sign(u) * tau_c * (1 - np.exp(-np.abs(u) / tau_c))
    mean = counts_per_bin * (1 - (1 - g0) * (prim(x + w / 2) - prim(x - w / 2)) / w)
    return normalize(CorrelationHistogram(x, rng.poisson(mean), CW, 0, 0))


class TestCwFit:
    def test_recovers_synthetic(self):
        res = fit_g2_cw(_synthetic_cw(0.3, 1.0, 2000, 11))
        assert res.params["tau_c_ns"] == pytest.approx(1.0, rel=0.1)
        assert res.method == "fit" and res.sigma > 0

    def test_pull_distribution(self):
        # over many synthetic histograms the quoted sigma must match the scatter
        fits = [fit_g2_cw(_synthetic_cw(0.3, 1.0, 2000, seed)) for seed in range(100)]
        z = np.array([(f.g2_0 - 0.3) / f.sigma for f in fits])
        assert abs(z.mean()) < 0.3
        assert 0.8 < z.std() < 1.25
        assert np.mean(np.abs(z) < 2) > 0.9

    def test_flat(self):
        hist = normalize(CorrelationHistogram(CW.bin_centers(), np.random.default_rng(12).poisson(2000, CW.n_bins),
                                              CW, 0, 0))
        res = fit_g2_cw(hist)
        assert res.g2_0 == pytest.approx(1.0, abs=0.1)
        assert res.params["dip_depth"] == pytest.approx(0.0, abs=0.1)

    def test_empty_raises(self):
        with pytest.raises(StatisticsError):
            fit_g2_cw(correlate(np.array([]), np.array([]), CW))

    def test_record_format(self):
        rec = fit_g2_cw(_synthetic_cw(0.3, 1.0, 2000, 13)).to_record("g2_pre")
        keys = [line.split(" = ")[0] for line in rec.splitlines()]
        assert keys[:3] == ["g2_pre.g2_0", "g2_pre.g2_0_sigma", "g2_pre.method"]


class TestPulsed:
    chain = ChainParams(detector_qe=1.0, dark_rate_hz=0.0, dead_time_ns=0.0, jitter_ps=0.0)

    def _hist(self, params, duration, seed):
        s = generate_pulsed_stream(params, duration, seed)
        a, b = split_stream(s, 0.5, seed + 1)
        det = detect_channels((a, b), self.chain, seed + 2)
        return correlate(det.channels[0], det.channels[1], PULSED)

    def test_ideal_source_zero_center(self):
        p = EmitterParams(mode="pulsed", emission_probability=1.0, t_fast_ns=0.3, t_slow_ns=0.6, pulse_width_ps=20)
        res = pulsed_g2(self._hist(p, 0.01, 14), 20.0)
        assert res.params["center_area"] == 0
        assert res.g2_0 == 0.0 and res.sigma > 0

    def test_poisson_contaminant_only_gives_one(self):
        p = EmitterParams(mode="pulsed", emission_probability=1.0, contaminant_ratio=0.5)
        s = generate_pulsed_stream(p, 0.02, 15)
        s = s.select(s.origin == Origin.CONTAMINANT)
        a, b = split_stream(s, 0.5, 16)
        res = pulsed_g2(correlate(a, b, PULSED), 20.0)
        assert abs(res.g2_0 - 1.0) < 3 * res.sigma

    def test_too_few_side_peaks(self):
        cfg = HbtConfig(mode="pulsed", period_ns=20.0, window_ns=30.0)
        h = correlate(np.arange(0, 1e5, 20.0), np.arange(0, 1e5, 20.0) + 0.1, cfg)
        with pytest.raises(StatisticsError, match="side peaks"):
            pulsed_g2(h, 20.0)

    def test_peak_count_at_default_window(self):
        h = correlate(np.arange(0, 1e5, 20.0), np.arange(0, 1e5, 20.0) + 0.1, PULSED)
        assert pulsed_g2(h, 20.0).params["n_side_peaks"] == 20


class TestAdmixture:
    def test_no_background(self):
        assert background_admixture_g2(0.2, 1.0) == 0.2

    def test_pure_background(self):
        assert background_admixture_g2(0.2, 0.0) == 1.0

    def test_sbr_100(self):
        assert background_admixture_g2(0.0, rho_from_sbr(100)) == pytest.approx(0.0197, abs=5e-5)

    def test_inverse(self):
        assert background_corrected_g2(background_admixture_g2(0.3, 0.9), 0.9) == pytest.approx(0.3)

    def test_domain(self):
        with pytest.raises(ValueError):
            background_admixture_g2(0.2, 1.5)


class TestLifetime:
    def test_single_exponential_degenerate(self):
        p = EmitterParams(mode="pulsed", rep_rate_mhz=10.0, fast_fraction=1.0, emission_probability=0.5)
        s = generate_pulsed_stream(p, 0.05, 17)
        c, n = decay_histogram(s.time_ns, p.period_ns, 0.064, offset_ns=p.period_ns / 2)
        fit = fit_lifetime(c, n, period_ns=p.period_ns)
        assert fit.degenerate
        assert fit.t_fast_ns == pytest.approx(1.12, rel=0.05)
        assert math.isnan(fit.t_slow_ns)

    def test_needs_counts(self):
        with pytest.raises(StatisticsError):
            fit_lifetime(np.arange(10.0), np.zeros(10))

    def test_pileup_model_recovers_slow_tail(self):
        # 50 MHz: the 12.4 ns tail wraps into the next period
        p = EmitterParams(mode="pulsed", rep_rate_mhz=50.0, emission_probability=0.5, t_fast_ns=0.93,
                          t_slow_ns=12.4, fast_fraction=0.7)
        s = generate_pulsed_stream(p, 0.05, 18)
        c, n = decay_histogram(s.time_ns, p.period_ns, 0.064, offset_ns=p.period_ns / 2)
        fit = fit_lifetime(c, n, period_ns=p.period_ns)
        assert abs(fit.t_slow_ns - 12.4) < 0.05 * 12.4 + 2 * fit.t_slow_sigma_ns
