"""Policy gradient methods for LQ control with i.i.d. random parameters."""

__version__ = "0.1.0"
