"""Exception hierarchy shared by all modules."""


class HagerlabError(Exception):
    """Base class for all library errors."""


class SymbolError(HagerlabError):
    """The Fourier symbol violates the two-critical-point hypothesis."""


class MultipleCritical(SymbolError):
    """Im g' changes sign more than twice on the scan grid."""


class DegenerateSymbol(SymbolError):
    """Im g is constant (no strip) or has no proper min/max pair."""


class OutOfStrip(HagerlabError):
    """Im z is not strictly inside the strip (with margin)."""


class RegimeViolation(HagerlabError):
    """The coupling constant is outside the admissible regime."""


class OnSpectrum(HagerlabError):
    """z lies on the unperturbed spectrum, where the resolvent is infinite."""


class NoRoot(HagerlabError):
    """A bracketed root search found no sign change."""


class NoInteriorMax(HagerlabError):
    """A maximization ended on the bracket boundary."""


class TooCloseToLine(HagerlabError):
    """Formula only valid away from the line Im z = <Im g>."""


class TooCloseToBoundary(HagerlabError):
    """Formula only valid at distance >> h^(2/3) from the strip boundary."""


class TruncationTooSmall(HagerlabError):
    """Discretization cutoff N is smaller than the symbol order."""


class NoConvergence(HagerlabError):
    """An iterative linear-algebra routine failed to converge."""

    def __init__(self, msg, trial=None):
        super().__init__(msg)
        self.trial = trial


class EigenvaluesNotRetained(HagerlabError):
    """Operation needs per-trial eigenvalues but the run discarded them."""


class ConfigError(HagerlabError):
    """Invalid experiment configuration; `field` names the offending key."""

    def __init__(self, msg, field=None):
        super().__init__(msg if field is None else f"{field}: {msg}")
        self.field = field
