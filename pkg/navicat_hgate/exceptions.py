#!/usr/bin/env python


class InputError(Exception):
    """Raised when there is an error in the input."""

    pass


class NoProgressError(Exception):
    """Raised when the attempt cap is reached before the basis schedule is complete."""

    pass
