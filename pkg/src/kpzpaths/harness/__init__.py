"""Experiment configuration, orchestration, reporting and the command line."""
