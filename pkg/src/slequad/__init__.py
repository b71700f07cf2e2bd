"""slequad: uniform spanning trees on lattice quads, their Peano curves
and middle branches, and the matching continuum objects (hypergeometric
SLE drivers, rectangle conformal maps, explicit endpoint densities), with
statistical machinery to compare the two sides."""

from .backend import backend_name

__all__ = ["backend_name"]
__version__ = "0.1.0"
