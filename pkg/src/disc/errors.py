"""Exception hierarchy.

Input problems (bad files, bad parameters, mismatched features) derive from
:class:`InputError`; failures of the linear algebra derive from
:class:`NumericError`. The CLI maps them to exit codes 1 and 2.
"""


class DiscError(Exception):
    pass


class InputError(DiscError, ValueError):
    pass


class ParseError(InputError):
    pass


class ShapeError(InputError):
    pass


class AlignmentError(InputError):
    pass


class ParameterError(InputError):
    pass


class DegenerateInputError(InputError):
    pass


class NumericError(DiscError, ArithmeticError):
    pass
