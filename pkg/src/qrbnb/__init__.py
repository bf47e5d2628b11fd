"""Branch-and-bound with quantum-relaxation (QRAC) lower bounds."""

__version__ = "0.1.0"
