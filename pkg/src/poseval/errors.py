"""Exception classes shared across the evaluation engine.

Exit-code contract of the command-line tools: errors derived from
:class:`InputError` map to exit code 1 (bad user input or bad files),
everything else derived from :class:`PosevalError` maps to exit code 2
(internal invariant violation).
"""


class PosevalError(Exception):
    """Base class for all errors raised by this package."""


class InputError(PosevalError):
    """User-supplied input (files, flags, config) is invalid."""


class MeshFormatError(InputError):
    """A mesh file could not be parsed or violates the format contract."""


class SubmissionFormatError(InputError):
    """A pose-submission CSV is malformed.

    Carries ``rows``: a list of ``(line_number, message)`` pairs, one per
    offending row.
    """

    def __init__(self, path, rows):
        self.path = str(path)
        self.rows = list(rows)
        lines = "; ".join(f"line {n}: {msg}" for n, msg in self.rows)
        super().__init__(f"{self.path}: {lines}")


class DatasetFormatError(InputError):
    """A dataset file (scene JSON, targets, depth image, ...) is invalid."""


class VertexBehindCamera(PosevalError):
    """A 3D point has Z <= 0 and cannot be projected.

    The scoring layer converts this into "incorrect at all thresholds"
    instead of aborting a run.
    """

    def __init__(self, index, z):
        self.index = int(index)
        self.z = float(z)
        super().__init__(f"point {self.index} has Z = {self.z:.6g} <= 0")


class InternalCheckError(PosevalError):
    """An internal consistency check failed (self-test mismatch etc.)."""
