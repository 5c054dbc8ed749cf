"""Numerical machinery for positive solutions of Delta u + u^p = 0 with
prescribed isolated singularities: singular radial profiles, indicial
analysis, glued approximate solutions, weighted right inverses of the
linearization, and the contraction iteration that produces exact solutions.
"""

__version__ = "0.1.0"

from . import params, radial  # noqa: F401
