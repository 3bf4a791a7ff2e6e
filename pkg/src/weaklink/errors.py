"""Exception types shared across the package."""


class WeakLinkError(Exception):
    """Base class for all package errors."""


class DomainError(WeakLinkError, ValueError):
    """An argument lies outside the domain of a constitutive relation."""


class SingularPointError(DomainError):
    """Evaluation requested at the discontinuity of the sawtooth CPR."""


class VanishedWellError(WeakLinkError):
    """The Hessian at a stationary point is not positive definite."""


class MergedWellsError(WeakLinkError):
    """No saddle separates two wells; they have merged."""


class ConvergenceError(WeakLinkError):
    """An iterative procedure did not reach its tolerance."""


class ResonanceError(WeakLinkError):
    """Perturbation theory hit an (almost) exact level degeneracy.

    Attributes
    ----------
    level : int
        Level index in the occupied well.
    partner : int
        Resonant level index in the neighbouring well.
    neighbour : int
        Offset of the neighbouring well (+1 or -1).
    """

    def __init__(self, level, partner, neighbour, gap):
        self.level = level
        self.partner = partner
        self.neighbour = neighbour
        self.gap = gap
        super().__init__(
            f"level {level} is degenerate with level {partner} of well "
            f"{neighbour:+d} (gap {gap:.3e} GHz)"
        )


class CriticalFluxNotFound(WeakLinkError):
    """No level crossing exceeded the rate threshold in the scanned window."""


class ConfigError(WeakLinkError):
    """A configuration document failed validation.

    ``key`` is the dotted path of the offending entry.
    """

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")
