"""Exception types shared across the package."""


class FdeError(Exception):
    """Base class for all errors raised by this package."""


class DisconnectedNetwork(FdeError):
    """The network has more than one connected component."""


class NonpositiveLength(FdeError):
    """An edge has zero, negative, or non-finite length."""


class DanglingEndpoint(FdeError):
    """An edge references a node that does not exist."""


class NetworkMismatch(FdeError):
    """Two objects that must share a network do not."""


class NonpositiveValue(FdeError):
    """A strictly positive value was required (e.g. before taking logs)."""


class NotADensity(FdeError):
    """A function flagged or required as a density fails the density invariants."""


class EmptyObservations(FdeError):
    """An observation set with at least one point was required."""


class PointOffNetwork(FdeError):
    """An observation does not lie on the network."""


class TooFewObservations(FdeError):
    """Not enough observations for the requested operation (e.g. CV folds)."""


class LambdaTooSmall(FdeError):
    """The penalty parameter does not exceed the existence threshold.

    Attributes
    ----------
    threshold : float
        The strict lower bound on the penalty for this data set.
    value : float
        The penalty that was requested.
    """

    def __init__(self, value, threshold):
        self.value = float(value)
        self.threshold = float(threshold)
        super().__init__(
            f"penalty {value!r} does not exceed the existence threshold "
            f"{threshold!r}; the estimator is only defined for strictly "
            f"larger penalties"
        )
