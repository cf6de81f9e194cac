"""Exception hierarchy shared by all dnavault modules."""


class DnaVaultError(Exception):
    """Base class. ``exit_code`` is what the CLI returns for it."""

    exit_code = 1


class DimensionMismatch(DnaVaultError, ValueError):
    pass


class EmptyKey(DnaVaultError, ValueError):
    pass


class QuadrupleAbsent(DnaVaultError, LookupError):
    pass


class NoConstrainedPosition(DnaVaultError, LookupError):
    pass


class PointerOverflow(DnaVaultError, ValueError):
    pass


class RegistryError(DnaVaultError):
    pass


class UnknownKey(DnaVaultError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class OrderNotDoublyEven(DnaVaultError, ValueError):
    pass


class MalformedContainer(DnaVaultError, ValueError):
    pass


class NotEmbedded(DnaVaultError):
    pass


class ChecksumMismatch(DnaVaultError):
    exit_code = 2


class DegenerateVariance(DnaVaultError, ArithmeticError):
    pass


class ImageFormatError(DnaVaultError, ValueError):
    pass


# multicloud

class NotFound(DnaVaultError):
    exit_code = 2


class Unavailable(DnaVaultError):
    exit_code = 2


class ConfigError(DnaVaultError, ValueError):
    pass


class AllBackendsFailed(DnaVaultError):
    exit_code = 2


class AllReplicasUnavailable(DnaVaultError):
    exit_code = 2


class IntegrityFailure(DnaVaultError):
    exit_code = 2
