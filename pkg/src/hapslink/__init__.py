"""Performance engine for HAPS-assisted mixed RF/FSO multicast relay chains."""

__version__ = "0.1.0"
