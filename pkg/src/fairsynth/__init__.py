"""De-biasing tabular classification data with group-targeted SMOTE."""

__version__ = "0.1.0"
