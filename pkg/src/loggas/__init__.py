"""Log-gas configurations, electric energies, screening and transport estimators."""

__version__ = "0.1.0"
