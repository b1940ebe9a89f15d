"""Last-passage percolation and inverse-gamma polymers: stationary models,
Busemann functions, tilted boundaries and tail experiments."""

from . import busemann, env, errors, lattice, lpp, polymer, tilt

__version__ = "0.1.0"

__all__ = ["busemann", "env", "errors", "lattice", "lpp", "polymer", "tilt", "__version__"]
