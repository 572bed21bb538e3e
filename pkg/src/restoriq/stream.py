"""Interleaved token streams with modality tags and the attention mask.

Text segments become BOS..EOS byte tokens; input images become
understanding-vision patch tokens bracketed by IMG_START/IMG_END; target
images become generation-latent tokens via the patch codec. All condition
tokens precede all response tokens. The mask gives a bidirectional
condition prefix, a causal response-text region, and a bidirectional
response-latent block that sees the whole condition and all response text;
no text position ever attends to a response latent.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from restoriq import tokenizer
from restoriq.corpus import ImageSegment, TextSegment, TrainingSample
from restoriq.errors import StreamError
from restoriq.imaging import encode

TEXT = "text"
UND_VISION = "und_vision"
GEN_LATENT = "gen_latent"

DEFAULT_MAX_SEQ_LEN = 512


@dataclass
class Token:
    modality: str
    payload: int | np.ndarray  # vocab id for text, patch vector otherwise
    seq_index: int
    coord: tuple[int, int] | None
    is_condition: bool


@dataclass
class TokenStream:
    tokens: list[Token]
    patch_size: int
    # classifier-free-guidance dropout flags; response tokens are never dropped
    drop_text: bool = False
    drop_vision: bool = False
    drop_clean_latent: bool = False
    grid_shape: tuple[int, int] | None = field(default=None)

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def l(self) -> int:
        return len(self.tokens)

    @property
    def l_con(self) -> int:
        return sum(1 for t in self.tokens if t.is_condition)

    @property
    def l_res(self) -> int:
        return self.l - self.l_con

    def positions(self, modality: str, condition: bool | None = None) -> list[int]:
        out = []
        for i, t in enumerate(self.tokens):
            if t.modality != modality:
                continue
            if condition is not None and t.is_condition != condition:
                continue
            out.append(i)
        return out

    @property
    def response_latent_positions(self) -> list[int]:
        return self.positions(GEN_LATENT, condition=False)

    @property
    def response_text_positions(self) -> list[int]:
        return self.positions(TEXT, condition=False)

    def response_latents(self) -> np.ndarray:
        """(N, 3*P*P) payload matrix of the response latents."""
        pos = self.response_latent_positions
        if not pos:
            raise StreamError("stream has no response latent tokens")
        return np.stack([self.tokens[i].payload for i in pos]).astype(np.float64)

    def with_drops(self, drop_text=False, drop_vision=False, drop_clean_latent=False):
        return replace(
            self,
            drop_text=drop_text,
            drop_vision=drop_vision,
            drop_clean_latent=drop_clean_latent,
        )

    def validate(self) -> None:
        seen_response = False
        for t in self.tokens:
            if t.is_condition and seen_response:
                raise StreamError("condition token found after a response token")
            if not t.is_condition:
                seen_response = True
        if self.l_con < 1:
            raise StreamError("stream has an empty condition")


def _text_tokens(text: str, start: int, is_condition: bool) -> list[Token]:
    ids = [tokenizer.BOS, *tokenizer.tokenize(text), tokenizer.EOS]
    return [
        Token(TEXT, i, start + k, None, is_condition) for k, i in enumerate(ids)
    ]


def _image_tokens(
    image: np.ndarray, modality: str, start: int, is_condition: bool, patch_size: int
) -> tuple[list[Token], tuple[int, int]]:
    grid = encode(image, patch_size)
    hp, wp = grid.grid_shape
    toks = []
    if modality == UND_VISION:
        toks.append(Token(TEXT, tokenizer.IMG_START, start, None, is_condition))
    for r in range(hp):
        for c in range(wp):
            toks.append(
                Token(
                    modality,
                    grid.tokens[r, c].copy(),
                    start + len(toks),
                    (r, c),
                    is_condition,
                )
            )
    if modality == UND_VISION:
        toks.append(Token(TEXT, tokenizer.IMG_END, start + len(toks), None, is_condition))
    return toks, (hp, wp)


def build_stream(
    sample: TrainingSample,
    patch_size: int = 4,
    max_seq_len: int = DEFAULT_MAX_SEQ_LEN,
) -> TokenStream:
    """Turn a training sample into one interleaved token stream."""
    tokens: list[Token] = []
    grid_shape = None
    for seg in sample.condition:
        if isinstance(seg, TextSegment):
            tokens.extend(_text_tokens(seg.text, len(tokens), True))
        else:
            toks, _ = _image_tokens(seg.image, UND_VISION, len(tokens), True, patch_size)
            tokens.extend(toks)
    for seg in sample.response:
        if isinstance(seg, TextSegment):
            tokens.extend(_text_tokens(seg.text, len(tokens), False))
        else:
            toks, grid_shape = _image_tokens(
                seg.image, GEN_LATENT, len(tokens), False, patch_size
            )
            tokens.extend(toks)
    if len(tokens) > max_seq_len:
        raise StreamError(
            f"stream length {len(tokens)} exceeds the cap of {max_seq_len}"
        )
    out = TokenStream(tokens=tokens, patch_size=patch_size, grid_shape=grid_shape)
    out.validate()
    return out


def build_condition_stream(
    segments: list,
    patch_size: int = 4,
    max_seq_len: int = DEFAULT_MAX_SEQ_LEN,
) -> TokenStream:
    """Condition-only stream for inference; the response is appended later."""
    tokens: list[Token] = []
    for seg in segments:
        if isinstance(seg, TextSegment):
            tokens.extend(_text_tokens(seg.text, len(tokens), True))
        else:
            toks, _ = _image_tokens(seg.image, UND_VISION, len(tokens), True, patch_size)
            tokens.extend(toks)
    if len(tokens) > max_seq_len:
        raise StreamError(
            f"stream length {len(tokens)} exceeds the cap of {max_seq_len}"
        )
    out = TokenStream(tokens=tokens, patch_size=patch_size)
    out.validate()
    return out


def append_response_text_token(stream: TokenStream, token_id: int) -> TokenStream:
    toks = list(stream.tokens)
    toks.append(Token(TEXT, int(token_id), len(toks), None, False))
    return replace(stream, tokens=toks)


def append_response_text(stream: TokenStream, text: str) -> TokenStream:
    """Append a full BOS..EOS response text block (external-prompt mode)."""
    toks = list(stream.tokens)
    toks.extend(_text_tokens(text, len(toks), False))
    return replace(stream, tokens=toks)


def append_response_latents(stream: TokenStream, grid_shape: tuple[int, int]) -> TokenStream:
    """Append zero placeholder latents covering an (hp, wp) patch grid."""
    hp, wp = grid_shape
    dim = 3 * stream.patch_size * stream.patch_size
    toks = list(stream.tokens)
    for r in range(hp):
        for c in range(wp):
            toks.append(
                Token(GEN_LATENT, np.zeros(dim, dtype=np.float64), len(toks), (r, c), False)
            )
    return replace(stream, tokens=toks, grid_shape=grid_shape)


def build_mask(stream: TokenStream) -> np.ndarray:
    """Boolean [L, L] attention matrix; True means row may attend to column."""
    n = len(stream.tokens)
    cond = np.array([t.is_condition for t in stream.tokens], dtype=bool)
    latent = np.array([t.modality == GEN_LATENT for t in stream.tokens], dtype=bool)
    resp_text = ~cond & ~latent
    resp_lat = ~cond & latent

    mask = np.zeros((n, n), dtype=bool)
    mask[cond] = cond[None, :]
    if resp_text.any():
        idx = np.arange(n)
        causal = idx[None, :] <= idx[:, None]
        rows = np.where(resp_text)[0]
        mask[rows] = cond[None, :] | (resp_text[None, :] & causal[rows])
    if resp_lat.any():
        mask[resp_lat] = cond[None, :] | resp_text[None, :] | resp_lat[None, :]
    return mask
