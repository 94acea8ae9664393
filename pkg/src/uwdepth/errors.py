"""Exception types shared by every module.

The CLI maps :class:`InputError` to exit code 2 and :class:`DegenerateError`
to exit code 3.
"""


class InputError(ValueError):
    """Bad input: wrong shape, malformed file, out-of-range parameter."""


class DegenerateError(ArithmeticError):
    """A quantity is numerically undefined for the given data
    (zero variance, empty valid set, zero median)."""
