"""Dispersion, quasi-phase-matching and conversion efficiency of a PPLN waveguide.

Wavelengths are vacuum wavelengths in nm, temperatures in degrees C, the
waveguide length in mm, the poling period in um and phase mismatch in rad/mm.

The extraordinary index comes from a temperature dependent Sellmeier set
stored as a versioned JSON file under ``qfcsim/data``.  Waveguide confinement
is represented by a constant effective-index offset per spectral band.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import ConfigurationError, DomainError, NumericalError

DEFAULT_SELLMEIER = "mgo_cln_e_gayer2008"

# sinc^2(x) = 1/2
SINC2_HALF_MAX_X = 1.3915573782515103

# band edges (nm) for the effective-index offsets
_BAND_EDGES_NM = (750.0, 1250.0)
BANDS = ("visible", "signal", "pump")


@dataclass(frozen=True)
class SellmeierModel:
    """Temperature dependent extraordinary index of MgO:LiNbO3.

    ``band_offsets`` maps ``"visible"``, ``"signal"`` and ``"pump"`` to a
    constant index offset added to the bulk value in that band.
    """

    name: str
    a: tuple[float, ...]
    b: tuple[float, ...]
    f_offsets_c: tuple[float, float]
    wavelength_range_nm: tuple[float, float]
    temperature_range_c: tuple[float, float]
    version: int = 1
    band_offsets: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.a) != 6 or len(self.b) != 4:
            raise ConfigurationError(f"Sellmeier set {self.name!r} needs 6 a and 4 b coefficients")
        unknown = set(self.band_offsets) - set(BANDS)
        if unknown:
            raise ConfigurationError(f"unknown band(s) {sorted(unknown)}; expected {BANDS}")
        lo, hi = self.wavelength_range_nm
        if not 0 < lo < hi:
            raise ConfigurationError(f"bad wavelength range {self.wavelength_range_nm}")
        # resonances (a3 UV, a5 IR) must stay outside the validity range
        for pole_um in (self.a[2], self.a[4]):
            if lo < pole_um * 1e3 < hi:
                raise ConfigurationError(f"Sellmeier pole at {pole_um} um lies inside the validity range")

    @classmethod
    def load(cls, name_or_path: str | Path = DEFAULT_SELLMEIER, band_offsets=None) -> "SellmeierModel":
        """Load a coefficient file by bundled name or filesystem path."""
        path = Path(name_or_path)
        if path.suffix == ".json" and path.exists():
            text = path.read_text()
        else:
            try:
                text = resources.files("qfcsim.data").joinpath(f"{name_or_path}.json").read_text()
            except FileNotFoundError:
                raise ConfigurationError(f"no Sellmeier coefficient set named {name_or_path!r}") from None
        raw = json.loads(text)
        return cls(
            name=raw["name"],
            version=int(raw["version"]),
            a=tuple(raw["a"]),
            b=tuple(raw["b"]),
            f_offsets_c=tuple(raw["f_offsets_c"]),
            wavelength_range_nm=tuple(raw["wavelength_range_nm"]),
            temperature_range_c=tuple(raw["temperature_range_c"]),
            band_offsets=dict(band_offsets or {}),
        )


@dataclass(frozen=True)
class QpmDesign:
    """Waveguide geometry plus the operating temperature.

    The design point ``(signal_nm, pump_nm, design_temperature_c)`` is the
    phase-matched triple the poling period was chosen for.
    """

    length_mm: float
    poling_period_um: float
    temperature_c: float
    signal_nm: float
    pump_nm: float
    design_temperature_c: float

    def __post_init__(self):
        if not self.length_mm > 0:
            raise ConfigurationError(f"waveguide length must be positive, got {self.length_mm}")
        if not self.poling_period_um > 0:
            raise ConfigurationError(f"poling period must be positive, got {self.poling_period_um}")
        if self.signal_nm <= 0 or self.pump_nm <= 0:
            raise ConfigurationError("design wavelengths must be positive")

    @property
    def output_nm(self) -> float:
        return float(sfg_output_wavelength(self.signal_nm, self.pump_nm))

    @classmethod
    def from_design_point(cls, signal_nm, pump_nm, design_temperature_c, length_mm=20.0,
                          model: SellmeierModel | None = None, temperature_c=None) -> "QpmDesign":
        model = model or SellmeierModel.load()
        period = solve_poling_period(signal_nm, pump_nm, design_temperature_c, model)
        return cls(
            length_mm=float(length_mm),
            poling_period_um=period,
            temperature_c=float(design_temperature_c if temperature_c is None else temperature_c),
            signal_nm=float(signal_nm),
            pump_nm=float(pump_nm),
            design_temperature_c=float(design_temperature_c),
        )

    def at_temperature(self, temperature_c: float) -> "QpmDesign":
        return replace(self, temperature_c=float(temperature_c))

    def check(self, model: SellmeierModel) -> None:
        """Raise ConfigurationError unless the design point is phase matched."""
        dk = phase_mismatch(self.signal_nm, self.pump_nm, self.design_temperature_c, self, model)
        grating = 2e3 * math.pi / self.poling_period_um
        if abs(dk) > 1e-6 * grating:
            raise ConfigurationError(
                f"design point is not phase matched: |dk| = {abs(dk):.3e} rad/mm "
                f"> 1e-6 x 2pi/period = {1e-6 * grating:.3e} rad/mm"
            )


@dataclass(frozen=True)
class EfficiencyModel:
    """Undepleted-pump SFG efficiency law plus the fixed linear losses.

    ``eta_nor_per_w`` multiplies the in-waveguide pump power (W) inside the
    square root of the sin^2 law, with the device length already absorbed.
    ``pump_transmission`` is the WDM-to-waveguide pump power factor.
    """

    eta_nor_per_w: float = 2.0
    eta_int_max: float = 1.0
    input_coupling: float = 0.60
    output_optics: float = 0.80
    filter_transmission: float = 1.0
    pump_transmission: float = 1.0

    def __post_init__(self):
        for name in ("eta_int_max", "input_coupling", "output_optics", "filter_transmission",
                     "pump_transmission"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigurationError(f"efficiency.{name} must lie in [0, 1], got {value}")
        if self.eta_nor_per_w < 0:
            raise ConfigurationError(f"efficiency.eta_nor_per_w must be >= 0, got {self.eta_nor_per_w}")

    @property
    def linear_transmission(self) -> float:
        return self.input_coupling * self.output_optics * self.filter_transmission

    @property
    def peak_power_mw(self) -> float:
        """WDM pump power at which the internal efficiency peaks."""
        if self.eta_nor_per_w == 0 or self.pump_transmission == 0:
            return math.inf
        return 1e3 * (math.pi / 2) ** 2 / (self.eta_nor_per_w * self.pump_transmission)

    def with_operating_point(self, eta_ext: float, power_mw: float) -> "EfficiencyModel":
        """Return a copy whose rising branch passes through ``eta_ext`` at ``power_mw``."""
        ceiling = self.linear_transmission * self.eta_int_max
        if not 0 < eta_ext <= ceiling:
            raise ConfigurationError(f"eta_ext = {eta_ext} is not reachable (ceiling {ceiling:.4f})")
        theta = math.asin(math.sqrt(eta_ext / ceiling))
        eta_nor = theta**2 / (power_mw * 1e-3 * self.pump_transmission)
        return replace(self, eta_nor_per_w=eta_nor)


def _band_offset(wavelength_nm, model: SellmeierModel):
    if not model.band_offsets:
        return 0.0
    idx = np.searchsorted(_BAND_EDGES_NM, wavelength_nm, side="right")
    table = np.array([model.band_offsets.get(b, 0.0) for b in BANDS])
    return table[idx]


def refractive_index(wavelength_nm, temperature_c, model: SellmeierModel):
    """Extraordinary index at ``wavelength_nm`` and ``temperature_c``.

    Accepts scalars or arrays.  Raises DomainError naming the violated bound
    when any argument leaves the validity range of the coefficient set.
    """
    lam = np.asarray(wavelength_nm, dtype=float)
    temp = np.asarray(temperature_c, dtype=float)
    lo, hi = model.wavelength_range_nm
    if lam.size and (np.nanmin(lam) < lo or np.nanmax(lam) > hi):
        bad = np.nanmin(lam) if np.nanmin(lam) < lo else np.nanmax(lam)
        bound = f"lower wavelength bound {lo} nm" if bad < lo else f"upper wavelength bound {hi} nm"
        raise DomainError(f"wavelength {bad} nm violates the {bound} of {model.name}")
    tlo, thi = model.temperature_range_c
    if temp.size and (np.nanmin(temp) < tlo or np.nanmax(temp) > thi):
        bad = np.nanmin(temp) if np.nanmin(temp) < tlo else np.nanmax(temp)
        bound = f"lower temperature bound {tlo} C" if bad < tlo else f"upper temperature bound {thi} C"
        raise DomainError(f"temperature {bad} C violates the {bound} of {model.name}")

    a1, a2, a3, a4, a5, a6 = model.a
    b1, b2, b3, b4 = model.b
    t0, t1 = model.f_offsets_c
    f = (temp - t0) * (temp + t1)
    l2 = (lam * 1e-3) ** 2
    n2 = a1 + b1 * f + (a2 + b2 * f) / (l2 - (a3 + b3 * f) ** 2) + (a4 + b4 * f) / (l2 - a5**2) - a6 * l2
    n = np.sqrt(n2) + _band_offset(lam, model)
    return n if n.ndim else float(n)


def sfg_output_wavelength(signal_nm, pump_nm):
    """Sum-frequency wavelength fixed by energy conservation."""
    s = np.asarray(signal_nm, dtype=float)
    p = np.asarray(pump_nm, dtype=float)
    if np.any(s <= 0) or np.any(p <= 0):
        raise DomainError("wavelengths must be positive")
    out = 1.0 / (1.0 / s + 1.0 / p)
    return out if out.ndim else float(out)


def _k_imbalance_per_nm(signal_nm, pump_nm, temperature_c, model):
    out = sfg_output_wavelength(signal_nm, pump_nm)
    return (refractive_index(out, temperature_c, model) / out
            - refractive_index(signal_nm, temperature_c, model) / signal_nm
            - refractive_index(pump_nm, temperature_c, model) / pump_nm)


def phase_mismatch(signal_nm, pump_nm, temperature_c, design: QpmDesign, model: SellmeierModel):
    """Residual wavevector mismatch dk (rad/mm), zero when quasi-phase matched."""
    imbalance = _k_imbalance_per_nm(signal_nm, pump_nm, temperature_c, model)
    return 2e6 * np.pi * imbalance - 2e3 * np.pi / design.poling_period_um


def solve_poling_period(signal_nm, pump_nm, temperature_c, model: SellmeierModel) -> float:
    """Poling period (um) that phase matches the given triple."""
    if signal_nm <= 0 or pump_nm <= 0:
        raise DomainError("wavelengths must be positive")
    imbalance = float(_k_imbalance_per_nm(signal_nm, pump_nm, temperature_c, model))
    if not imbalance > 0 or not math.isfinite(imbalance):
        raise ConfigurationError(
            f"wavevector imbalance {imbalance:.4e} nm^-1 is not positive; "
            "this wavelength ordering cannot be quasi-phase matched with first-order poling"
        )
    return 1.0 / (imbalance * 1e3)


def qpm_response(delta_k, length_mm):
    """Normalized sinc^2(dk L / 2) phase-matching response."""
    if not length_mm > 0:
        raise DomainError(f"length must be positive, got {length_mm}")
    x = np.asarray(delta_k, dtype=float) * length_mm / 2
    r = np.sinc(x / np.pi) ** 2
    return r if r.ndim else float(r)


def response_vs_signal(signal_nm, design: QpmDesign, model: SellmeierModel, pump_nm=None):
    pump = design.pump_nm if pump_nm is None else pump_nm
    dk = phase_mismatch(signal_nm, pump, design.temperature_c, design, model)
    return qpm_response(dk, design.length_mm)


def acceptance_bandwidth_signal(design: QpmDesign, model: SellmeierModel,
                                window_nm: float = 2.0, scan_points: int = 4001,
                                xtol_nm: float = 1e-4) -> float:
    """FWHM (nm) of the response as the signal is scanned with the pump fixed."""
    grid = np.linspace(design.signal_nm - window_nm, design.signal_nm + window_nm, scan_points)
    resp = response_vs_signal(grid, design, model)
    ipk = int(np.argmax(resp))
    if resp[ipk] < 0.5:
        raise NumericalError(
            f"response never reaches half maximum in [{grid[0]:.3f}, {grid[-1]:.3f}] nm "
            f"(peak {resp[ipk]:.3g})"
        )

    def half(x):
        return float(response_vs_signal(x, design, model)) - 0.5

    below = np.flatnonzero(resp < 0.5)
    left = below[below < ipk]
    right = below[below > ipk]
    if not len(left) or not len(right):
        raise NumericalError(
            f"no half-maximum crossing on both sides of the peak within "
            f"[{grid[0]:.3f}, {grid[-1]:.3f}] nm; widen window_nm"
        )
    i, j = left[-1], right[0]
    lo = brentq(half, grid[i], grid[i + 1], xtol=xtol_nm)
    hi = brentq(half, grid[j - 1], grid[j], xtol=xtol_nm)
    return hi - lo


def phase_matched_pump(signal_nm: float, temperature_c: float, design: QpmDesign,
                       model: SellmeierModel, search_nm: float = 150.0) -> float:
    """Pump wavelength with dk = 0 for this signal and temperature."""

    def dk(p):
        return float(phase_mismatch(signal_nm, p, temperature_c, design, model))

    lo, hi = design.pump_nm - search_nm, design.pump_nm + search_nm
    if dk(lo) * dk(hi) > 0:
        raise NumericalError(
            f"no phase-matched pump in [{lo:.1f}, {hi:.1f}] nm for signal {signal_nm} nm at {temperature_c} C"
        )
    return brentq(dk, lo, hi, xtol=1e-9)


def tuning_curve(temperatures_c, design: QpmDesign, model: SellmeierModel,
                 xtol_nm: float = 1e-3) -> list[tuple[float, float]]:
    """(T, output wavelength) with the pump re-optimized at every temperature.

    The signal stays at the design value.  Each optimum is located by a
    golden-section search of the sinc^2 response around the dk = 0 root.
    """
    points = []
    for t in temperatures_c:
        t = float(t)
        guess = phase_matched_pump(design.signal_nm, t, design, model)

        def neg_response(p):
            dk = phase_mismatch(design.signal_nm, p, t, design, model)
            return -qpm_response(dk, design.length_mm)

        span = 0.2
        res = minimize_scalar(neg_response, bracket=(guess - span, guess, guess + span),
                              method="golden", tol=xtol_nm / (2 * guess))
        if not res.success or abs(res.x - guess) > span:
            raise NumericalError(f"pump optimization did not converge at {t} C: {res.message}")
        points.append((t, float(sfg_output_wavelength(design.signal_nm, res.x))))

    out = np.array([p[1] for p in points])
    steps = np.diff(out)
    if len(steps) and not (np.all(steps > 0) or np.all(steps < 0)):
        raise NumericalError("tuning curve is not monotone over the requested temperatures")
    return points


def conversion_efficiency(pump_power_mw, eff: EfficiencyModel):
    """Internal and external conversion efficiency at a WDM pump power (mW)."""
    p = np.asarray(pump_power_mw, dtype=float)
    if np.any(p < 0):
        raise DomainError(f"pump power must be non-negative, got {pump_power_mw}")
    theta = np.sqrt(eff.eta_nor_per_w * eff.pump_transmission * p * 1e-3)
    eta_int = eff.eta_int_max * np.sin(theta) ** 2
    eta_ext = eff.linear_transmission * eta_int
    if eta_int.ndim == 0:
        return float(eta_int), float(eta_ext)
    return eta_int, eta_ext
