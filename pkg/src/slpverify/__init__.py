"""slpverify: finite-domain consistency and refinement checking for SLP models."""

from .errors import (EvalError, ExecutionError, ParseError, ScopeError,
                     SlpError, StateSpaceExceeded)
from .model import SlpModel
from .parser import parse_expression, parse_model, parse_predicate
from .printer import render
from .session import Options, Session
from .validate import Diagnostic, validate_model

__version__ = "0.1.0"

__all__ = [
    "Diagnostic", "EvalError", "ExecutionError", "Options", "ParseError",
    "ScopeError", "Session", "SlpError", "SlpModel", "StateSpaceExceeded",
    "parse_expression", "parse_model", "parse_predicate", "render",
    "validate_model", "__version__",
]
