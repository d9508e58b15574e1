"""Exception hierarchy shared by all voipmark modules."""


class VoipmarkError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(VoipmarkError, ValueError):
    pass


class ContractError(VoipmarkError, ValueError):
    """A caller broke an operation's precondition."""


class OrderingError(VoipmarkError):
    pass


class EmptyBufferError(VoipmarkError):
    pass


class NonceExhaustedError(VoipmarkError):
    """The 32-bit nonce space for this session is used up; the session must abort."""


class FramingError(VoipmarkError, ValueError):
    pass


class TooShortError(VoipmarkError, ValueError):
    pass


class TerminalStateError(VoipmarkError):
    pass


class FormatError(VoipmarkError):
    """Audio file is not 16-bit mono PCM."""


class SetupError(VoipmarkError):
    pass
