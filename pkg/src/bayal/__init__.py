"""Pool-based active learning with uncertainty screening and a Bayesian D-optimal pick."""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"
