"""hypersol: equilibrium-chemistry Euler solver with a neural closure surrogate."""

__version__ = "0.1.0"
