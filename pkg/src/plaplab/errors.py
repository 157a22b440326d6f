"""Exception types shared across the package."""


class PlaplabError(Exception):
    """Base class for all package errors."""


class ConfigurationError(PlaplabError, ValueError):
    """Invalid domain, grid, weight or scenario configuration."""


class ParameterError(PlaplabError, ValueError):
    """Invalid numerical parameter (exponent, tolerance, ...)."""


class DomainError(PlaplabError, ValueError):
    """Input field outside the domain of a functional (zeros, sign, ...)."""
