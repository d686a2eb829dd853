"""MultiDeepGP: mixed-outcome spatial prediction with MC-dropout networks."""

__version__ = '1.0.0'
