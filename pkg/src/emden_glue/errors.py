"""Exception hierarchy shared across the package.

Two families matter to callers: ``ConfigError`` covers violated
preconditions and invalid inputs (the CLI maps these to exit code 2),
``NumericalError`` covers runtime failures of a numerical procedure
(exit code 3).
"""


class EmdenGlueError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(EmdenGlueError, ValueError):
    """Invalid parameters, specs, or violated preconditions."""


class NumericalError(EmdenGlueError, RuntimeError):
    """A numerical procedure failed to meet its contract."""


# -- parameter domain -------------------------------------------------------

class DimensionTooSmall(ConfigError):
    pass


class SubthresholdExponent(ConfigError):
    pass


class SupercriticalExponent(ConfigError):
    pass


class WeightOutOfRange(ConfigError):
    pass


# -- radial profile ---------------------------------------------------------

class NoConvergence(NumericalError):
    pass


class ToleranceUnreachable(NumericalError):
    pass


# -- ODE channels -----------------------------------------------------------

class GridTooCoarse(ConfigError):
    pass


class NormalizationFailure(NumericalError):
    pass


class RootsTooClose(ConfigError):
    pass


class FitUnreliable(NumericalError):
    pass


class TailNotDecayed(NumericalError):
    pass


# -- weighted norms ---------------------------------------------------------

class NodeOnSingularSet(ConfigError):
    pass


class ExponentOrdering(ConfigError):
    pass


# -- gluing -----------------------------------------------------------------

class SpecInvalid(ConfigError):
    pass


# -- linear solve -----------------------------------------------------------

class IncompatibleDomain(ConfigError):
    pass


class SolverStagnation(NumericalError):
    pass


class SingularSystem(NumericalError):
    pass


class BarrierFailure(NumericalError):
    pass


# -- fixed point ------------------------------------------------------------

class Diverged(NumericalError):
    pass


class LeftBall(NumericalError):
    pass


class PositivityLost(NumericalError):
    pass


class MaxIterations(NumericalError):
    pass
