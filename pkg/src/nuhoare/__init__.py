"""nu-hoare: a checker toolkit for the nu-calculus and its program logic."""

__version__ = "0.1.0"
