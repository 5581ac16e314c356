"""Goldstone-boson normal coordinates on finite spin systems."""

from .core_ops import ContractError, HermitianOperator, ResourceError, SiteObservable

__all__ = ["ContractError", "HermitianOperator", "ResourceError", "SiteObservable"]
__version__ = "0.1.0"
