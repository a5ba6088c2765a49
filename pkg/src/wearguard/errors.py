"""Exception hierarchy shared across the pipeline.

Each error carries the CLI exit code it maps to, so the command layer can
translate failures without inspecting messages.
"""


class WearguardError(Exception):
    exit_code = 4


class DataError(WearguardError):
    """Input data is missing, unreadable or inconsistent."""

    exit_code = 2


class DecodeError(DataError):
    def __init__(self, message: str, line: int | None = None, path=None):
        self.line = line
        self.path = path
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{':'.join(where)}: " if where else ""
        super().__init__(prefix + message)


class StreamIntegrityError(DataError):
    """Timestamps went backwards or repeated."""


class InsufficientDataError(DataError):
    pass


class ConsistencyError(DataError):
    """Detections and run metadata disagree (e.g. unknown run id)."""


class ConfigError(WearguardError):
    exit_code = 3
