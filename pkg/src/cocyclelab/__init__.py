"""cocyclelab: a numerical laboratory for cocycles over hyperbolic bases.

The package makes a transfer-function theory executable: concrete hyperbolic
base systems, periodic-orbit obstruction checks for circle-diffeomorphism and
matrix cocycles, fibered Lyapunov exponents and domination tests, cohomological
equation solvers along dense orbits, and the invariant-section / holonomy /
trivialization machinery that ties them together.
"""

__version__ = "0.1.0"
