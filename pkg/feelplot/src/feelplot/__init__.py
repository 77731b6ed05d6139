"""feelplot: accuracy-vs-iteration figures from feelsim metrics CSVs."""

__version__ = "0.1.0"

from .cli import main, render
from .curves import SCHEMA, CurveSpec, SchemaError, moving_average, read_metrics
