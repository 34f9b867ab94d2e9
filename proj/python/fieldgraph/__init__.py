"""Superpixel graph convolution for crop stress detection."""

from ._fieldgraph import *  # noqa: F401,F403
from ._fieldgraph import __doc__  # noqa: F401
