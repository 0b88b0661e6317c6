"""Rigorous certification that the triangular bi-pyramid minimizes a family
of pair potentials over five-point configurations on the unit sphere.

Subpackages split along the proof's phases: interval kernels, dyadic cell
geometry on the moduli space, rigorous energy lower bounds, the global
divide-and-conquer search, exact local Hessian analysis at the minimizer,
and polynomial positivity certificates that extend the result to a
continuum of exponents.
"""

__version__ = "0.1.0"
