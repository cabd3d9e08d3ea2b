"""backend/data/loaders/__init__.py"""
from .csv_loader import CsvLoader, CsvSchema, load_csv

__all__ = ["CsvLoader", "CsvSchema", "load_csv"]
