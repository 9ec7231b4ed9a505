"""dG(0)/dG(1) time stepping with P1 finite elements for the 1D wave equation."""

__version__ = "0.1.0"
