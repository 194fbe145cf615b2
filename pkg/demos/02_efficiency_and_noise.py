"""
Conversion efficiency and pump-induced noise
============================================

The sin^2 efficiency law with the operating point at 800 mW, and the
signal-to-background ratio of a 30 fW probe against Raman noise.
"""

from qfcsim import qpm
from qfcsim.chain import sbr_monte_carlo, signal_to_background
from qfcsim.scenario import load_preset

sc = load_preset("fig1c")
eff = sc.efficiency
print(f"peak internal efficiency at {eff.peak_power_mw:.0f} mW")

powers = [25, 50, 100, 200, 400, 800, 1600]
eta_int, eta_ext = qpm.conversion_efficiency(powers, eff)

rate = sc.probe.photon_rate_hz
print(f"probe: {sc.probe.power_fw} fW = {rate:.4g} photons/s")
print(" P (mW)  eta_int  eta_ext      SBR")
for p, ei, ee, pt in zip(powers, eta_int, eta_ext, signal_to_background(sc.chain, powers, rate)):
    print(f"{p:7.0f}  {ei:7.3f}  {ee:7.3f}  {pt.sbr:7.0f}")

# Monte Carlo check of two anchors with a reduced photon budget
mc = sbr_monte_carlo(sc.chain, [50.0, 800.0], rate, sc.probe.wavelength_nm, 2e5, 200.0, seed=7)
for pt in mc:
    print(f"MC {pt.power_mw:4.0f} mW: SBR = {pt.sbr:.0f} +- {pt.sbr_sigma:.0f}, eta_ext = {pt.eta_ext:.3f}")
