"""RRAM compute-in-memory core simulator."""

from ._cimforge import *  # noqa: F401,F403
from ._cimforge import __doc__  # noqa: F401

__version__ = "0.1.0"
