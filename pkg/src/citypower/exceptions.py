"""Exception hierarchy shared by every module.

Each leaf class carries the offending value as an attribute so callers (and
the CLI's machine-readable error output) can inspect it without parsing the
message.
"""


class CityPowerError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ConfigError(CityPowerError):
    exit_code = 2


class IoError(CityPowerError):
    exit_code = 3


class DataError(CityPowerError, ValueError):
    exit_code = 4


class SchemaError(DataError):
    pass


class MissingColumn(DataError):
    def __init__(self, name):
        super().__init__(f"missing column {name!r}")
        self.name = name


class UnparseableCell(DataError):
    def __init__(self, row, column, value=None):
        super().__init__(f"row {row}, column {column!r}: cannot parse {value!r}")
        self.row = row
        self.column = column
        self.value = value


class DuplicateCityId(DataError):
    def __init__(self, city_id):
        super().__init__(f"duplicate city_id {city_id!r}")
        self.city_id = city_id


class EmptyDataset(DataError):
    pass


class UnknownId(DataError, KeyError):
    def __init__(self, city_id):
        DataError.__init__(self, f"unknown city_id {city_id!r}")
        self.city_id = city_id

    def __str__(self):
        return self.args[0]


class UnknownFeature(DataError, KeyError):
    def __init__(self, name):
        DataError.__init__(self, f"unknown feature {name!r}")
        self.name = name

    def __str__(self):
        return self.args[0]


class FractionOutOfRange(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class LengthMismatch(DataError):
    pass


class ZeroVariance(DataError):
    pass


class EmptyBatch(DataError):
    pass


class EmptySet(DataError):
    pass


class TrainingError(CityPowerError):
    exit_code = 5


class DivergenceDetected(TrainingError):
    def __init__(self, epoch, train_mse, val_mse):
        super().__init__(
            f"non-finite loss at epoch {epoch}: train_mse={train_mse!r}, val_mse={val_mse!r}"
        )
        self.epoch = epoch
        self.train_mse = train_mse
        self.val_mse = val_mse
