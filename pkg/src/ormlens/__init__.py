"""ormlens: static performance analysis and workload simulation for
ORM-backed web applications written in the RailLite DSL."""

from .analysis import Analysis, analyze_ir, analyze_source
from .appmodel.parser import parse_app
from .errors import OrmLensError

__version__ = "0.1.0"

__all__ = ["Analysis", "OrmLensError", "analyze_ir", "analyze_source",
           "parse_app", "__version__"]
