"""czsim: simulation and calibration toolkit for coupler-mediated CZ gates."""

__version__ = "0.1.0"
