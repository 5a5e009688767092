"""Exception hierarchy. Every error carries a short machine-readable ``code``."""


class IoncoolError(Exception):
    code = "E_IONCOOL"


class ConfigError(IoncoolError, ValueError):
    code = "E_CONFIG"


class DegenerateTrapError(ConfigError):
    code = "E_DEGENERATE_TRAP"


class NumericalError(IoncoolError, ArithmeticError):
    code = "E_NUMERICAL"


class NonUniqueSteadyStateError(NumericalError):
    """Null space of the Liouvillian has dimension > 1.

    ``null_space`` holds an orthonormal basis of vectorized
    solutions (row-major) so callers can inspect what the possible steady states look like.
    """

    code = "E_NONUNIQUE_STEADY_STATE"

    def __init__(self, msg, null_space=None, singular_values=None):
        super().__init__(msg)
        self.null_space = null_space
        self.singular_values = singular_values


class SingularResolventError(NumericalError):
    code = "E_SINGULAR_RESOLVENT"

    def __init__(self, msg, eigenvalue=None):
        super().__init__(msg)
        self.eigenvalue = eigenvalue


class FitError(IoncoolError):
    code = "E_FIT"

    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best


class NoCoolingRegionError(IoncoolError):
    code = "E_NO_COOLING"

    def __init__(self, msg, result=None):
        super().__init__(msg)
        self.result = result


class UsageError(ConfigError):
    code = "E_USAGE"
