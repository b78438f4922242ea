"""GBDT dressing engine for the Dirac-Weyl system."""

__version__ = "0.1.0"
