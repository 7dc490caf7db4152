"""shla: L-infinity structure maps and deformation tools for coisotropic foliations, computed on charts."""
from .expr import Expr, parse, ParseError, UnboundSymbolError, EvalError  # noqa: F401
from .chart import ChartSpec, ChartError, load_chart, builtin_flat_torus, builtin_oscillator  # noqa: F401

__version__ = "0.1.0"
