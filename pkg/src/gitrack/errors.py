"""Exception types raised across the package."""


class GitrackError(Exception):
    """Base class for every error raised by gitrack."""


# model validation

class ModelError(GitrackError, ValueError):
    pass


class RowNotStochastic(ModelError):
    def __init__(self, matrix, row, total):
        self.matrix = matrix
        self.row = row
        self.total = total
        where = matrix if row is None else f"{matrix} row {row}"
        super().__init__(f"{where} sums to {total!r}, expected 1")


class StructureViolation(ModelError):
    def __init__(self, row, col, value):
        self.row = row
        self.col = col
        self.value = value
        super().__init__(
            f"transition[{row}][{col}] = {value!r}: only the diagonal and "
            "superdiagonal may be nonzero"
        )


class OutOfRangeEntry(ModelError):
    pass


class OutOfRange(GitrackError, ValueError):
    pass


class ConfigInvalid(GitrackError, ValueError):
    pass


# decoding

class EmptyObservations(GitrackError, ValueError):
    pass


class ImpossibleObservation(GitrackError, ValueError):
    def __init__(self, frame=None):
        self.frame = frame
        if frame is None:
            super().__init__("every stage sequence has zero likelihood")
        else:
            super().__init__(f"every state has zero likelihood at frame {frame}")


class SequenceTooLong(GitrackError, ValueError):
    pass


class LengthMismatch(GitrackError, ValueError):
    pass


class TruthNotMonotone(GitrackError, ValueError):
    pass


class DecoderFinished(GitrackError, RuntimeError):
    pass


# calibration / evaluation

class NoLabeledStudies(GitrackError, ValueError):
    pass


class EmptyGrid(GitrackError, ValueError):
    pass


class NoTruth(GitrackError, ValueError):
    pass


class EmptyInput(GitrackError, ValueError):
    pass


# file formats

class ParseError(GitrackError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MalformedRow(ParseError):
    pass


class NonContiguousFrames(ParseError):
    pass


class UnknownLabel(ParseError):
    pass


class MixedTruthPresence(ParseError):
    pass
