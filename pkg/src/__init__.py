"""
Confidence sets for estimators defined by linear and quadratic programs.
"""

__version__ = "0.1.0"
