"""Experiment orchestration: configuration, records, replay and reporting."""
