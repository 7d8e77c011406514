"""Exception hierarchy shared by all modules."""


class InarHawkesError(Exception):
    """Base class for errors raised by this package."""


class Supercritical(InarHawkesError, ValueError):
    """A reproduction mean is not strictly below one."""


class MassNotSubcritical(Supercritical):
    pass


class DiscretizationSupercritical(Supercritical):
    pass


class TailTooHeavy(InarHawkesError, ValueError):
    pass


class InvalidProbability(InarHawkesError, ValueError):
    pass


class SeriesTooShort(InarHawkesError, ValueError):
    pass


class SingularDesign(InarHawkesError, ValueError):
    pass


class UnsupportedArgument(InarHawkesError, ValueError):
    pass


class MisalignedWindow(InarHawkesError, ValueError):
    pass


class EmptySamples(InarHawkesError, ValueError):
    pass


class ConfigInvalid(InarHawkesError, ValueError):
    pass
