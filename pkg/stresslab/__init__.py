"""stresslab: macro stress scenarios to portfolio tail risk."""

__version__ = "0.3.0"
