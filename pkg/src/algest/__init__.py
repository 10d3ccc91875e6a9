"""Algebraic parameter estimation for carriers satisfying linear ODEs with
polynomial coefficients, compiled to iterated-integral estimators."""

__version__ = "0.1.0"
