"""Errors raised across noisytree.

Everything derives from :class:`NoisyTreeError`, so callers (and the CLI) can catch the whole family at once.
"""




class NoisyTreeError(Exception):
    pass


class AssemblyAmbiguous(NoisyTreeError):
    pass


class DimensionMismatch(NoisyTreeError):
    pass


class DomainError(NoisyTreeError, ValueError):
    pass


class FileFormatError(NoisyTreeError):
    pass


class GridMismatch(NoisyTreeError):
    pass


class Infeasible(NoisyTreeError):
    pass


class InsufficientCorrelation(NoisyTreeError):
    pass


class InvalidShape(NoisyTreeError):
    pass


class NonConvergence(NoisyTreeError):
    pass


class NotPositiveDefinite(NoisyTreeError):
    pass


class SizeGuard(NoisyTreeError):
    pass


class SupportViolation(NoisyTreeError):
    pass


class UnknownPreset(NoisyTreeError):
    pass


class ZeroVariance(NoisyTreeError):
    pass
