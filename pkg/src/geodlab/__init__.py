"""Numerical laboratory for counting closed geodesics on the model
once-punctured torus: exact word enumeration, orbit-point lattice counts,
geodesic-flow sampling, and trajectory nets, with a small CLI on top.
"""

__all__ = ["__version__"]
__version__ = "0.1.0"
