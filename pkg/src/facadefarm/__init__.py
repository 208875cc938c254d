"""Facade-level PAR / DLI simulation for urban-farming site selection."""

__version__ = "0.1.0"
