"""Stochastic Hodgkin-Huxley neurons, spike-train regime tests and rotating circuits."""

from .errors import ConfigError, DomainError, IntegrationBlowup

__version__ = "0.1.0"

__all__ = ["ConfigError", "DomainError", "IntegrationBlowup", "__version__"]
