"""Weak asymptotics of N-body scattering wave functions: numerical toolkit."""

__version__ = "0.1.0"
