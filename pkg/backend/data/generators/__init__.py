"""backend/data/generators/__init__.py"""
from .bias_dataset import make_synthetic

__all__ = ["make_synthetic"]
