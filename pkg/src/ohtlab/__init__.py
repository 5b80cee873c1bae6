"""ohtlab: a software laboratory for optical homodyne tomography."""

__version__ = "0.1.0"

from .states import DensityMatrix, StateSpec, WignerGrid, make_state  # noqa: F401
