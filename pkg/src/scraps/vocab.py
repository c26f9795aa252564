"""Phoneme vocabulary, pronunciation lexicon, and text-to-phoneme lookup.

Token IDs are laid out with three reserved slots — PAD=0, BOS=1, EOS=2 —
followed by the phoneme symbols in file order starting at ID 3.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

from .errors import PhonemizeError, VocabularyError

log = logging.getLogger(__name__)

PAD_ID = 0
BOS_ID = 1
EOS_ID = 2
N_RESERVED = 3

# Display names for the reserved slots; rejected as file symbols.
RESERVED_NAMES = ("<pad>", "<bos>", "<eos>")

_WORD_RE = re.compile(r"[a-z0-9']+")


@dataclass(frozen=True)
class Vocabulary:
    """Ordered phoneme inventory with reserved PAD/BOS/EOS slots."""

    symbols: tuple[str, ...]
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.symbols:
            raise VocabularyError("vocabulary has no symbols")
        index = {}
        for i, sym in enumerate(self.symbols):
            if sym in RESERVED_NAMES:
                raise VocabularyError(f"symbol {sym!r} collides with a reserved token")
            if sym in index:
                raise VocabularyError(f"duplicate symbol {sym!r}")
            index[sym] = N_RESERVED + i
        object.__setattr__(self, "_index", index)

    @property
    def size(self) -> int:
        """Total ID count, reserved slots included."""
        return N_RESERVED + len(self.symbols)

    @property
    def phoneme_ids(self) -> range:
        return range(N_RESERVED, self.size)

    def id_of(self, symbol: str) -> int:
        try:
            return self._index[symbol]
        except KeyError:
            raise VocabularyError(f"unknown symbol {symbol!r}") from None

    def symbol_of(self, token_id: int) -> str:
        if N_RESERVED <= token_id < self.size:
            return self.symbols[token_id - N_RESERVED]
        if 0 <= token_id < N_RESERVED:
            return RESERVED_NAMES[token_id]
        raise VocabularyError(f"token id {token_id} out of range [0, {self.size})")

    def __contains__(self, symbol: str) -> bool:
        return symbol in self._index


@dataclass
class PhonemeSequence:
    """Phoneme token IDs for one utterance (reserved tokens excluded)."""

    ids: list[int]
    source_text: str | None = None

    def __post_init__(self):
        if len(self.ids) < 1:
            raise ValueError("phoneme sequence must contain at least one token")
        self.ids = [int(i) for i in self.ids]

    def __len__(self) -> int:
        return len(self.ids)


def load_vocab(path) -> Vocabulary:
    """Load a vocabulary file: UTF-8, one phoneme symbol per line.

    Blank lines are skipped. Raises VocabularyError on duplicates or an
    empty file; I/O problems propagate as OSError.
    """
    with open(path, encoding="utf-8") as fh:
        symbols = [line.strip() for line in fh if line.strip()]
    if not symbols:
        raise VocabularyError(f"empty vocabulary file: {path}")
    return Vocabulary(tuple(symbols))


def builtin_vocab() -> Vocabulary:
    """The bundled X-SAMPA-style English phoneme inventory."""
    from importlib.resources import files

    text = files("scraps.data").joinpath("xsampa_en.txt").read_text("utf-8")
    return Vocabulary(tuple(line.strip() for line in text.splitlines() if line.strip()))


def save_vocab(vocab: Vocabulary, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sym in vocab.symbols:
            fh.write(sym + "\n")


def load_lexicon(path) -> dict[str, list[str]]:
    """Load a pronunciation lexicon: `word  sym sym sym`, one entry per line."""
    lex: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            word, prons = parts[0].lower(), parts[1:]
            if not prons:
                raise PhonemizeError(f"{path}:{ln}: word {word!r} has no pronunciation")
            if word in lex:
                raise PhonemizeError(f"{path}:{ln}: duplicate lexicon entry {word!r}")
            lex[word] = prons
    return lex


def phonemize(
    text: str,
    lexicon: dict[str, list[str]],
    vocab: Vocabulary,
    strict: bool = True,
) -> PhonemeSequence:
    """Map text to phoneme IDs by dictionary lookup.

    Words are lowercased and punctuation-stripped, then looked up in the
    lexicon and concatenated (no word-boundary token). Out-of-lexicon
    words raise PhonemizeError in strict mode and are skipped with a
    warning otherwise.
    """
    words = _WORD_RE.findall(text.lower())
    ids: list[int] = []
    for word in words:
        pron = lexicon.get(word)
        if pron is None:
            if strict:
                raise PhonemizeError(f"word {word!r} not in lexicon")
            log.warning("skipping out-of-lexicon word %r", word)
            continue
        for sym in pron:
            if sym not in vocab:
                raise PhonemizeError(
                    f"lexicon entry {word!r} uses symbol {sym!r} not in vocabulary"
                )
            ids.append(vocab.id_of(sym))
    if not ids:
        raise PhonemizeError(f"no phonemizable words in {text!r}")
    return PhonemeSequence(ids, source_text=text)
