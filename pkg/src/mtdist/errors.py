"""Exception types shared across the package."""


class MtdistError(Exception):
    """Base class for all library errors."""


class ValidationError(MtdistError):
    """A structural invariant of a merge tree or its labeling is violated."""


class CycleDetected(ValidationError):
    pass


class MultipleRoots(ValidationError):
    pass


class NonDecreasingScalar(ValidationError):
    """A child's scalar is not strictly below its parent's."""


class DisconnectedVertex(ValidationError):
    pass


class MissingLeafLabel(ValidationError):
    """A leaf carries no label."""


class InvalidVertex(MtdistError):
    pass


class UnknownLabel(MtdistError):
    pass


class DuplicateLabel(MtdistError):
    pass


class NonLeafLabel(MtdistError):
    pass


class LabelMismatch(MtdistError):
    """Two matrices do not share the same label index sets."""


class KTooLarge(MtdistError):
    pass


class NonFiniteCost(MtdistError):
    pass


class NotFullAgreement(MtdistError):
    pass


class DisagreementUnsupported(MtdistError):
    """The baseline needs geometric embedding data to handle disjoint labels."""


class DisagreementEmptyTree(MtdistError):
    pass


class TooLarge(MtdistError):
    """Instance exceeds the exhaustive-search guard."""


class TooSmall(MtdistError):
    pass


class TooManyDeletions(MtdistError):
    pass


class MtreeSyntaxError(MtdistError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no
