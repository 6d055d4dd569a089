"""Testing utilities and helper functions."""

from .helpers import *
