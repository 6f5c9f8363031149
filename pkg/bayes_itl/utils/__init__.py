"""
Bayes ITL - Utilities Package

- cli.py: command-line entry point (`bayes-itl`)
"""

__all__ = ["cli"]
