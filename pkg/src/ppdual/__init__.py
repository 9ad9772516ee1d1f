"""Almost-Kähler duals of pp-wave metrics: curvature, integrability, geodesics
and Penrose plane-wave limits, checked numerically."""

__version__ = "0.1.0"
