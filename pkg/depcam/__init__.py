"""
depcam: diversified exponential-family PCA mixtures for clustering binary data.
"""

__version__ = "0.1.0"
__author__ = "depcam developers"
__license__ = "MIT"
