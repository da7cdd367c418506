"""Neural-network surrogates for contaminant source identification in a
2D confined aquifer."""

__version__ = "0.1.0"
