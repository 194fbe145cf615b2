"""
Phase matching in a periodically poled MgO:LN waveguide
=======================================================

Solve the poling period for 983.8 nm + 1550 nm -> ~601.8 nm, then look at
how narrow the conversion window is and how it moves with temperature.
"""

import numpy as np

from qfcsim import qpm
from qfcsim.scenario import load_preset

sc = load_preset("fig1b")
design, model = sc.design, sc.sellmeier
print(f"poling period      {design.poling_period_um:.4f} um")
print(f"output wavelength  {qpm.sfg_output_wavelength(design.signal_nm, design.pump_nm):.3f} nm")

# the sinc^2 response as the signal is detuned, pump held fixed
detuning = np.linspace(-0.5, 0.5, 11)
resp = qpm.response_vs_signal(design.signal_nm + detuning, design, model)
for d, r in zip(detuning, resp):
    print(f"  {d:+.2f} nm  {r:6.3f}  " + "#" * int(40 * r))

fwhm = qpm.acceptance_bandwidth_signal(design, model)
print(f"acceptance FWHM    {fwhm:.3f} nm")

# temperature tuning: the pump is re-optimized at each point
for t, out in qpm.tuning_curve([25, 40, 58.8, 75, 90], design, model):
    print(f"  {t:5.1f} C  ->  {out:.3f} nm")
