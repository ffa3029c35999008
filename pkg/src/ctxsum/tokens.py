"""Token counting: a dependency-free fallback tokenizer and a byte-level BPE.

The fallback tokenizer splits on whitespace and punctuation and is what the
rest of the toolchain uses unless a vocabulary/merges pair is supplied.
Counts produced by the fallback are approximate stand-ins for BPE counts and
are flagged as such wherever statistics are reported.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

import regex as _regex

__all__ = [
    "FallbackTokenizer",
    "BpeTokenizer",
    "TokenizerError",
    "count_tokens",
    "default_tokenizer",
]


class TokenizerError(Exception):
    """Raised when exact-mode tokenizer files are missing or malformed."""


_FALLBACK_PATTERN = re.compile(r"[A-Za-z0-9_]+|[^\sA-Za-z0-9_]")


class FallbackTokenizer:
    """Whitespace/punctuation splitter: identifier runs are one token each,
    every other non-space character is its own token."""

    name = "fallback"
    exact = False

    def tokens(self, text: str) -> list[str]:
        return _FALLBACK_PATTERN.findall(text)

    def count(self, text: str) -> int:
        return len(self.tokens(text))


_DEFAULT = FallbackTokenizer()


def default_tokenizer() -> FallbackTokenizer:
    return _DEFAULT


def count_tokens(text: str, tokenizer=None) -> int:
    """Count tokens under the given tokenizer (fallback when omitted)."""
    return (tokenizer or _DEFAULT).count(text)


# Byte-level BPE in the GPT-2 style: bytes are mapped onto printable unicode
# code points, text is pre-split with the GPT-2 pattern, and merges are
# applied lowest-rank first within each pre-token.

_SPLIT_PATTERN = _regex.compile(
    r"'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+"
)


def bytes_to_unicode() -> dict[int, str]:
    """Map every byte to a printable unicode char (the GPT-2 convention)."""
    bs = (
        list(range(ord("!"), ord("~") + 1))
        + list(range(ord("\xa1"), ord("\xac") + 1))
        + list(range(ord("\xae"), ord("\xff") + 1))
    )
    cs = bs[:]
    n = 0
    for b in range(256):
        if b not in bs:
            bs.append(b)
            cs.append(256 + n)
            n += 1
    return dict(zip(bs, (chr(c) for c in cs)))


_BYTE_ENCODER = bytes_to_unicode()


class BpeTokenizer:
    """Byte-level BPE initialized from a vocabulary file and a merges file."""

    name = "bpe"
    exact = True

    def __init__(self, vocab: dict[str, int], merges: list[tuple[str, str]]):
        self.vocab = vocab
        self.ranks = {pair: i for i, pair in enumerate(merges)}
        for left, right in merges:
            if left + right not in vocab:
                raise TokenizerError(
                    f"merge result {left + right!r} missing from vocabulary"
                )
        self._cache: dict[str, tuple[str, ...]] = {}

    @classmethod
    def from_files(cls, vocab_path: str | Path, merges_path: str | Path) -> "BpeTokenizer":
        vocab_path = Path(vocab_path)
        merges_path = Path(merges_path)
        if not vocab_path.is_file():
            raise TokenizerError(f"vocabulary file not found: {vocab_path}")
        if not merges_path.is_file():
            raise TokenizerError(f"merges file not found: {merges_path}")
        try:
            vocab = json.loads(vocab_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise TokenizerError(f"vocabulary file is not valid JSON: {exc}") from exc
        merges: list[tuple[str, str]] = []
        for line in merges_path.read_text(encoding="utf-8").splitlines():
            if not line or line.startswith("#"):
                continue
            parts = line.split(" ")
            if len(parts) != 2:
                raise TokenizerError(f"malformed merge line: {line!r}")
            merges.append((parts[0], parts[1]))
        return cls(vocab, merges)

    def _bpe(self, pretoken: str) -> tuple[str, ...]:
        cached = self._cache.get(pretoken)
        if cached is not None:
            return cached
        parts = list(pretoken)
        while len(parts) > 1:
            pairs = {(parts[i], parts[i + 1]) for i in range(len(parts) - 1)}
            best = min(pairs, key=lambda p: self.ranks.get(p, float("inf")))
            if best not in self.ranks:
                break
            left, right = best
            merged: list[str] = []
            i = 0
            while i < len(parts):
                if i < len(parts) - 1 and parts[i] == left and parts[i + 1] == right:
                    merged.append(left + right)
                    i += 2
                else:
                    merged.append(parts[i])
                    i += 1
            parts = merged
        result = tuple(parts)
        self._cache[pretoken] = result
        return result

    def tokens(self, text: str) -> list[str]:
        out: list[str] = []
        for match in _SPLIT_PATTERN.findall(text):
            encoded = "".join(_BYTE_ENCODER[b] for b in match.encode("utf-8"))
            out.extend(self._bpe(encoded))
        return out

    def count(self, text: str) -> int:
        return len(self.tokens(text))
