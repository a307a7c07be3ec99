"""Numerical toolkit for rotation-invariant Finsler metrics.

Metrics of the form F = |ybar| * phi(x0, r, s, z) on I x R^n: geodesic spray
coefficients, Berwald and Landsberg curvature tensors (closed forms plus
independent differentiation oracles), PDE-based characterizations, and the
explicit non-Berwaldian Landsberg family.
"""

__version__ = "0.1.0"
