"""Numeric core: autodiff tensors, recurrent kernels and layers."""

from .autodiff import Tensor
from .kernels import ACTIVE_BACKEND

__all__ = ["Tensor", "ACTIVE_BACKEND"]
