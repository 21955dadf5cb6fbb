"""Strongly coupled UVLM aeroelasticity with exact, quasi- and inexact Newton solvers."""

__version__ = "0.1.0"
