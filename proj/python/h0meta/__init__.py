"""Python interface to the h0meta C++ library."""

from ._h0meta import *  # noqa: F401,F403
from ._h0meta import __version__  # noqa: F401
