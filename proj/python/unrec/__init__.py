"""Sequential unlearning benchmark for recommendation models."""

from unrec._core import *  # noqa: F401,F403
from unrec._core import __version__  # noqa: F401
