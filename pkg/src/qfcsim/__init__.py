"""Monte Carlo toolkit for quantum frequency conversion of single-photon streams."""

__version__ = "0.1.0"
