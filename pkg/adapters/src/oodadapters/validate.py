"""Contract check: an emission is valid iff the evaluation toolkit accepts it."""

from __future__ import annotations

import subprocess
import sys
from pathlib import Path


def validate_output(prediction_file: str | Path, image_file: str | Path | None = None) -> int:
    """Exit status of the toolkit CLI validating this emission (0 = accepted)."""
    command = [sys.executable, "-m", "oodeval", "validate", "--predictions", str(prediction_file)]
    if image_file is not None:
        command += ["--images", str(image_file)]
    completed = subprocess.run(command, capture_output=True, text=True)
    if completed.returncode != 0:
        sys.stderr.write(completed.stderr)
    return completed.returncode
