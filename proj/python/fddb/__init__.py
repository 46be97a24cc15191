"""Frequency-decoupled dual-branch synthetic-to-real image translation."""

from ._fddb import *  # noqa: F401,F403
from ._fddb import __doc__  # noqa: F401

__version__ = "0.1.0"
