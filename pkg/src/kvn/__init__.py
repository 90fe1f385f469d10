"""Koopman-von Neumann mechanics of charged particles: superspace lifts,
minimal coupling, gauge transformations and spectra on phase-space grids."""

__version__ = "0.1.0"
