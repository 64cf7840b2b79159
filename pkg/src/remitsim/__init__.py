"""Cohort-based simulation and calibration of monthly bilateral remittance flows."""

__version__ = "0.1.0"
