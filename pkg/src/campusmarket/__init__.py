"""Campus-local second-hand marketplace service."""

__version__ = "0.1.0"
