"""Exception types. The CLI maps each family to an exit code."""


class CrowdInfluenceError(Exception):
    pass


class DomainError(CrowdInfluenceError, ValueError):
    """An argument outside the domain of an operation."""


class ConfigError(CrowdInfluenceError):
    pass


class DataError(CrowdInfluenceError):
    """Input files that cannot be read or parsed."""


class InvariantError(CrowdInfluenceError):
    """An internal consistency check failed."""
