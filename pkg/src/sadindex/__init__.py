"""Demographically adjusted social-media sentiment (SAD index) via post-stratification."""

__version__ = "0.1.0"
