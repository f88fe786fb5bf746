"""Exact symbolic calculus for KP-type hierarchies: pseudodifferential
symbols, their q-deformation, star products on phase space, and the
correspondence between Sato and Moyal formulations."""

__version__ = "0.1.0"
