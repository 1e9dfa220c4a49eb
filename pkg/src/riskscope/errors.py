"""Exception hierarchy shared across the package."""


class RiskscopeError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(RiskscopeError):
    """Schema definition or schema/data mismatch problems."""


class DatasetError(RiskscopeError):
    """CSV loading and validation failures (bad types, bounds, shape)."""


class QueryError(RiskscopeError):
    """Invalid query structure, or a query that cannot run on the schema."""


class EmptyAverageError(QueryError):
    """AVG evaluated over zero matching rows.

    Raised rather than imputing a value: for neighbor evaluation the removed
    record may have been the only match, and any substitute would fabricate
    sensitivity. Callers are expected to reject the query.
    """


class ParameterError(RiskscopeError):
    """Invalid privacy parameters (epsilon, delta, sensitivity, thresholds)."""


class OdometerError(RiskscopeError):
    """Privacy-loss accounting violations (duplicate charges, unset delta_g)."""


class JournalError(OdometerError):
    """A persisted charge journal failed validation on load."""
