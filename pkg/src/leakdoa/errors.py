"""Exception types raised by the estimators and the analytic model."""


class LeakDoaError(Exception):
    """Base class for numerical failures inside the package."""


class DegenerateModelError(LeakDoaError):
    """A signal eigenvalue coincides with the noise power."""


class IllConditionedError(LeakDoaError):
    """A steering matrix built from estimated DOAs is (numerically) rank deficient."""


class PolynomialDegreeError(LeakDoaError):
    """The leading coefficient of a polynomial vanishes."""


class RootPairingError(LeakDoaError):
    """Roots could not be split into conjugate-reciprocal pairs."""


class EstimationError(LeakDoaError):
    """Every candidate evaluated by an estimator failed."""
