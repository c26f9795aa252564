"""Exception types shared across the package."""


class ScrapsError(Exception):
    """Base class for all scraps-specific failures."""


class VocabularyError(ScrapsError):
    """Bad vocabulary file: duplicate symbol, empty file, reserved name."""


class PhonemizeError(ScrapsError):
    """Out-of-lexicon word in strict mode, or lexicon/vocabulary mismatch."""


class AudioFormatError(ScrapsError):
    """WAV input that is not 16 kHz / mono / 16-bit PCM, or too short."""


class SmelFormatError(ScrapsError):
    """Malformed SMEL file: bad magic, bad version, size mismatch."""


class CheckpointError(ScrapsError):
    """Malformed checkpoint file or version mismatch."""


class TrainingDivergedError(ScrapsError):
    """Loss or parameters became non-finite during training."""
