"""Exception hierarchy shared by all modules."""


class MultiviewError(Exception):
    """Base class for every error raised by this package."""


class EvenOrTooSmallBlocksize(MultiviewError, ValueError):
    pass


class NonFiniteLogit(MultiviewError, ValueError):
    pass


class EmptyTrainingSet(MultiviewError, ValueError):
    pass


class LabelOutOfRange(MultiviewError, ValueError):
    pass


class ShapeMismatch(MultiviewError, ValueError):
    pass


class EmptyMemberList(MultiviewError, ValueError):
    pass


class LengthMismatch(MultiviewError, ValueError):
    pass


class InsufficientSamples(MultiviewError, ValueError):
    pass


class ImageListMismatch(MultiviewError, ValueError):
    pass


class FewerThanTwoSystems(MultiviewError, ValueError):
    pass


class MissingRoot(MultiviewError, FileNotFoundError):
    pass


class UnreadableImage(MultiviewError, OSError):
    def __init__(self, path, reason=""):
        self.path = str(path)
        msg = f"cannot read image {self.path}"
        super().__init__(f"{msg}: {reason}" if reason else msg)


class EmptyClass(MultiviewError, ValueError):
    pass


class SpecOutOfRange(MultiviewError, ValueError):
    pass


class FingerprintMismatch(MultiviewError, ValueError):
    pass
