"""Direct and transposed Fast Hough Transforms, with a small trainable network around them."""
from .fht import (
    OpCounter,
    Quadrant,
    fht_forward,
    fht_quadrant,
    fht_transposed,
    flip_rows,
    indentation,
    indentation_matrix,
    pattern,
)

__version__ = "0.1.0"
