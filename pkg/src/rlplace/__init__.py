"""Dynamic service placement on edge servers for vehicular networks."""

__version__ = "0.1.0"
