"""Exception hierarchy shared by all spinlab modules."""


class SpinlabError(Exception):
    """Base class; the CLI maps these to exit code 1."""


class DimensionError(SpinlabError, ValueError):
    pass


class NUnavailable(SpinlabError):
    """No real automorphism anticommuting with Clifford multiplication (n = 3 mod 4)."""


class QUnavailable(SpinlabError):
    """No quaternionic structure (n mod 8 not in {2, 3, 4})."""


class CoincidentPoints(SpinlabError, ValueError):
    pass


class DenominatorVanishes(SpinlabError):
    pass


class DenominatorWrongSign(SpinlabError):
    pass


class StencilOutOfDomain(SpinlabError, ValueError):
    pass


class TrivialSpinStructure(SpinlabError):
    """D has a kernel (parallel spinors), so there is no Green function."""


class SingularSystem(SpinlabError):
    pass


class PoleInChart(SpinlabError, ValueError):
    pass


class NonConvergent(SpinlabError):
    pass


class ChartNotFlat(SpinlabError):
    pass


class HermitianDefectTooLarge(SpinlabError):
    pass


class ContinuityViolation(SpinlabError):
    pass


class ExpansionDataMissing(SpinlabError):
    pass


class ZeroMassEndomorphism(SpinlabError):
    """Mass endomorphism has no nonzero eigenvalue at the base point."""
