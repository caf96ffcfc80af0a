"""
Option checks for string and enum valued parameters (schemes, boundary modes, solver methods).
"""

import functools
import inspect
from enum import Enum
from typing import Iterable


def _plain(value):
    return value.value if isinstance(value, Enum) else value


class ParameterChoiceError(ValueError):
    def __init__(self, name, value, options):
        self.name = name
        self.value = value
        self.options = [_plain(_o) for _o in options]
        super().__init__(
            f"Invalid {name} {_plain(value)!r}, expected one of {', '.join(map(repr, self.options))}."
        )


def check_option(name, value, options: Iterable):
    """
    Returns ``value`` if it is one of ``options`` and raises :class:`ParameterChoiceError` otherwise. String enums compare equal to their values, so ``"ito"`` passes wherever ``Scheme.ITO`` does.
    """
    options = list(options)
    if value not in options:
        raise ParameterChoiceError(name, value, options)
    return value


def choices(name, values, doc=True):
    """
    Decorator that checks parameter ``name`` against ``values`` whenever the caller passes it. Defaults are trusted.

    With ``doc=True`` the accepted values are listed after ``:param <name>:`` in the docstring.
    """
    values = list(values)
    listing = ", ".join(f"``{_plain(_v)}``" for _v in values)

    def wrapper(fxn):
        if doc and fxn.__doc__:
            tag = f":param {name}:"
            fxn.__doc__ = fxn.__doc__.replace(tag, f"{tag} One of {listing}.", 1)
        signature = inspect.signature(fxn)

        @functools.wraps(fxn)
        def checked(*args, **kwargs):
            bound = signature.bind(*args, **kwargs)
            if name in bound.arguments:
                check_option(name, bound.arguments[name], values)
            return fxn(*args, **kwargs)

        return checked

    return wrapper
