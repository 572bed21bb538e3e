"""Byte-level tokenizer: 256 byte tokens plus five special tokens.

detokenize(tokenize(s)) == s for any text; no external vocabulary assets.
"""

from __future__ import annotations

BOS = 256
EOS = 257
IMG_START = 258
IMG_END = 259
PAD = 260

VOCAB_SIZE = 261

SPECIAL_TOKENS = {BOS: "<bos>", EOS: "<eos>", IMG_START: "<img>", IMG_END: "</img>", PAD: "<pad>"}


def tokenize(text: str) -> list[int]:
    """UTF-8 bytes of the text, one token per byte."""
    return list(text.encode("utf-8"))


def detokenize(ids: list[int]) -> str:
    """Inverse of tokenize; special tokens are skipped."""
    data = bytes(i for i in ids if 0 <= i < 256)
    return data.decode("utf-8", errors="replace")
