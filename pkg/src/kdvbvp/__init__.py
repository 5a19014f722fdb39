"""Korteweg-de Vries initial-boundary-value solvers on a bounded interval."""
__version__ = "0.1.0"
