"""Exception types shared across the toolkit."""


class GridlinkError(Exception):
    """Base for all toolkit errors."""


class DegenerateGeometryError(GridlinkError):
    """Polygon has fewer than 3 distinct vertices or zero area."""


class ParseError(GridlinkError):
    """Malformed input row; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SchemaError(GridlinkError):
    """Input violates the declared schema (shape, dimensions, fields)."""


class BoundsError(GridlinkError):
    """Index range outside the grid."""


class ConsistencyError(GridlinkError):
    """Precomputed artifacts do not match (weights vs frame grid)."""


class ConfigError(GridlinkError):
    """Invalid run or generator configuration."""


class StageDependencyError(GridlinkError):
    """A pipeline stage is missing a predecessor's output artifact."""

    def __init__(self, stage: str, missing: str):
        super().__init__(f"stage '{stage}' requires missing artifact: {missing}")
        self.stage = stage
        self.missing = missing


class EmptyInputError(GridlinkError):
    """Operation received an empty series or collection."""
