"""
Calibrating an unknown parameter
================================

The contaminant ratio of the pulsed device is not measured directly.
Bisect it so the simulated pre-conversion g2(0) matches 0.23.
Common random numbers keep the observable monotone in the knob.
"""

from qfcsim.scenario import calibrate, load_preset

sc = load_preset("fig3").scaled(0.2)
res = calibrate(sc, "g2_pre", "emitter.contaminant_ratio", goal=0.23, tol=0.006, bounds=(1.0, 2.4))
print(res.report())
