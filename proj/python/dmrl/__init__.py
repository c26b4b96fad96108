"""Python bindings for the dmrl C++ core."""

from ._dmrl import *  # noqa: F401,F403
from ._dmrl import __doc__  # noqa: F401
