"""Frequency-dependent relaxator Liouville dynamics for open quantum systems."""
