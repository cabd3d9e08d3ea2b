"""backend/data/__init__.py"""
from .dataset import Dataset, Normalizer, Split, split
from .generators import make_synthetic
from .loaders import CsvLoader, CsvSchema, load_csv

__all__ = [
    "Dataset",
    "Normalizer",
    "Split",
    "split",
    "make_synthetic",
    "CsvLoader",
    "CsvSchema",
    "load_csv",
]
