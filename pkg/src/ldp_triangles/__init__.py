"""Triangle counting under edge local differential privacy with low download cost."""

__version__ = "0.1.0"
