"""Couplings of matching distributions and path-coupling experiments.

Prevent circular imports by importing in a very specific order.
isort:skip_file
"""

from ._base import *
from .cayley import *
from .matchings import *
from .path_coupling import *
