"""Sampling and approximate counting of list packings with Glauber dynamics."""

from . import counting, coupling, dynamics, graphio, matchings, packing, utils

# Import top-level functions
from .graphio import Instance, load_instance, parse_instance
from .packing import Packing

__author__ = """packcount developers"""
__email__ = "packcount@users.noreply.github.com"
__version__ = "0.1.0-dev.0"
