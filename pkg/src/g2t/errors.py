"""Exception hierarchy shared across the toolkit.

The CLI maps these to exit codes: DataError -> 3, NumericError -> 4.
Plain ValueError/TypeError indicate caller bugs and are not translated.
"""


class G2TError(Exception):
    pass


class DataError(G2TError):
    """Bad input data: files, datasets, lexicons, model files."""


class DatasetFormatError(DataError):
    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f"{path}"
            if line is not None:
                loc += f":{line}"
            loc = f" [{loc}]"
        super().__init__(f"{message}{loc}")
        self.path = path
        self.line = line


class ModelFileError(DataError):
    """Base for model (de)serialization failures."""


class ModelFormatError(ModelFileError):
    """Bad magic or header, unknown format version."""


class ModelTruncatedError(ModelFileError):
    """File ends before the tensors declared in the header."""


class ModelShapeError(ModelFileError):
    """Stored tensor shapes do not match the declared configuration."""


class NumericError(G2TError):
    """Numeric failure during compute (non-finite values, divergence)."""


class NonFiniteError(NumericError):
    def __init__(self, where):
        super().__init__(f"non-finite values produced in {where}")
        self.where = where


class DivergenceError(NumericError):
    def __init__(self, epoch, batch):
        super().__init__(f"training diverged (NaN loss) at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch
