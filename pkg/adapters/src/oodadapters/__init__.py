"""Thin detector adapters emitting oodeval prediction files."""

from .backends import available_models, create_backend
from .backends.base import DetectorBackend, RawDetection
from .config import AdapterConfig, AdapterError
from .runner import RunResult, run_inference
from .validate import validate_output

__version__ = "0.1.0"
