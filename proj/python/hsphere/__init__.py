"""Intrinsic statistics on the Hilbert sphere of square-root densities."""

from ._hsphere import *  # noqa: F401,F403
from ._hsphere import __version__  # noqa: F401
