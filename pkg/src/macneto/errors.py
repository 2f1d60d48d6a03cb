"""Exception hierarchy.

Everything raised on purpose derives from MacnetoError so the CLI can map
failures to exit codes without enumerating modules.
"""


class MacnetoError(Exception):
    """Base class for all data/usage errors raised by this package."""


class MalformedClassFile(MacnetoError):
    """A .class image violates the class-file layout.

    Carries the byte offset at which parsing failed.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class UnknownMnemonic(MacnetoError):
    """A textual-format token is neither an opcode mnemonic nor a call token."""


class DuplicateMethod(MacnetoError):
    """Two methods in one class share a name + descriptor."""


class ManifestError(MacnetoError):
    """A corpus manifest is structurally invalid or has broken pair links."""


class DimensionMismatch(MacnetoError):
    """Vector length does not match the model/index dimension."""


class NonFiniteLoss(MacnetoError):
    """Training produced NaN/Inf; usually means the learning rate is too high."""


class EmptyCorpus(MacnetoError):
    """An operation that needs at least one entry got none."""


class DuplicateAppId(MacnetoError):
    """Two index entries share an app id."""


class InsufficientFold(MacnetoError):
    """A fold leaves fewer training apps than the component count."""


def annotate(exc: MacnetoError, prefix: str) -> MacnetoError:
    """Clone exc with a context prefix on its message, keeping type and attrs."""
    clone = exc.__class__.__new__(exc.__class__)
    clone.__dict__.update(exc.__dict__)
    clone.args = (f"{prefix}: {exc}",)
    return clone
