"""Python bindings for the bevf C++ core."""

from ._bevf import *  # noqa: F401,F403
from ._bevf import __doc__  # noqa: F401
