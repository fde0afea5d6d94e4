from ._calmreg import *  # noqa: F401,F403
from ._calmreg import ValidationError, DomainError, NumericalError  # noqa: F401

__version__ = "0.1.0"
