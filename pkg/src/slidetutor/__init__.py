"""slidetutor: plan a lecture from a slide deck and teach it interactively."""

__version__ = "0.1.0"
