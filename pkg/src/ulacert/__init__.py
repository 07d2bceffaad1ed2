"""Certified total-variation bounds for the unadjusted Langevin algorithm."""

from . import certifier, coupling, errors, oracle, potentials, sampler, schedule

__version__ = "0.1.0"

__all__ = ["certifier", "coupling", "errors", "oracle", "potentials", "sampler", "schedule", "__version__"]
