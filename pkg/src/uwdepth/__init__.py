"""Losses, priors, augmentation and metrics for self-supervised underwater
monocular depth, plus a synthetic underwater renderer to check them against."""

from uwdepth.errors import DegenerateError, InputError

__version__ = "0.1.0"

__all__ = ["DegenerateError", "InputError", "__version__"]
