"""Numerical checks for quadratic optimal transport: exact 1D transport,
discrete and entropic 2D solvers, density paths, the linearised
Monge-Ampere problem and the second variation of the squared distance."""

import os as _os

_os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

__version__ = "0.1.0"
