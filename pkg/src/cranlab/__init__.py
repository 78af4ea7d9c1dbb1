"""cranlab - C-RAN fronthaul compression, capacity and dimensioning toolkit."""

__version__ = "0.1.0"
