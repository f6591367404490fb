"""Token-stream container for fill-in-the-middle face sequences.

Layout: [S_CTX] ctx-tokens [E_CTX] target-tokens [EOS], with per-token
annotations carried out-of-band: a flag byte and a context position index.

Flag bits (u8):
    bit 0 (CONTEXT)  - token belongs to the context segment
    bit 1 (BOUNDARY) - token's vertex lies on the exposed boundary

Context positions number the context segment's coordinate tokens 0..n-1 in
order; every other token carries -1.

Two interchange encodings, both bit-exact:

JSON record (one object per line in .jsonl files):
    {"tokens": [...], "flags": [...], "ctx_pos": [...],
     "vocab": {"bins": B, "sentinels": {"s_ctx": B, "e_ctx": B+1, "eos": B+2}}}

Binary (little-endian throughout):
    magic b"FSEQ" | u16 version=1 | u16 bins | u32 n
    | n * u16 token | n * u8 flag
(ctx_pos is derivable: the k-th context-flagged token has position k.)
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

FLAG_CONTEXT = 1
FLAG_BOUNDARY = 2

_MAGIC = b"FSEQ"
_VERSION = 1


class SequenceError(Exception):
    """Malformed token stream."""


@dataclass
class FimSequence:
    tokens: np.ndarray  # (n,) uint16
    flags: np.ndarray  # (n,) uint8
    ctx_pos: np.ndarray  # (n,) int32, -1 where absent
    bins: int

    def __post_init__(self):
        self.tokens = np.asarray(self.tokens, dtype=np.uint16)
        self.flags = np.asarray(self.flags, dtype=np.uint8)
        self.ctx_pos = np.asarray(self.ctx_pos, dtype=np.int32)
        if not (len(self.tokens) == len(self.flags) == len(self.ctx_pos)):
            raise SequenceError("tokens/flags/ctx_pos length mismatch")

    # sentinel ids live directly above the coordinate vocabulary
    @property
    def s_ctx(self) -> int:
        return self.bins

    @property
    def e_ctx(self) -> int:
        return self.bins + 1

    @property
    def eos(self) -> int:
        return self.bins + 2

    def __len__(self) -> int:
        return len(self.tokens)

    def validate(self) -> None:
        toks = self.tokens.astype(np.int64)
        if len(toks) < 3:
            raise SequenceError("sequence too short for sentinel structure")
        for sid, name in ((self.s_ctx, "s_ctx"), (self.e_ctx, "e_ctx"), (self.eos, "eos")):
            if int((toks == sid).sum()) != 1:
                raise SequenceError(f"expected exactly one {name} sentinel")
        if toks[0] != self.s_ctx or toks[-1] != self.eos:
            raise SequenceError("sentinels out of place")
        e = int(np.nonzero(toks == self.e_ctx)[0][0])
        if (len(toks) - 2 - e) % 12 != 0 or (e - 1) % 12 != 0:
            raise SequenceError("segment length not a multiple of 12")
        ctx = (self.flags & FLAG_CONTEXT) != 0
        if ctx.any():
            idx = np.nonzero(ctx)[0]
            if idx[0] != 1 or idx[-1] != e - 1 or len(idx) != e - 1:
                raise SequenceError("context flags must cover exactly the context segment")
            if not np.array_equal(self.ctx_pos[idx], np.arange(len(idx), dtype=np.int32)):
                raise SequenceError("context positions must be sequential")
        if np.any(self.ctx_pos[~ctx] != -1):
            raise SequenceError("ctx_pos set outside context tokens")
        if np.any((self.flags & FLAG_BOUNDARY) & ~np.where(ctx, FLAG_BOUNDARY, 0)):
            raise SequenceError("boundary markers allowed on context tokens only")

    @property
    def context_slice(self) -> slice:
        e = int(np.nonzero(self.tokens.astype(np.int64) == self.e_ctx)[0][0])
        return slice(1, e)

    @property
    def target_slice(self) -> slice:
        e = int(np.nonzero(self.tokens.astype(np.int64) == self.e_ctx)[0][0])
        return slice(e + 1, len(self.tokens) - 1)

    # -- JSON ---------------------------------------------------------------

    def to_record(self) -> dict:
        return {
            "tokens": self.tokens.astype(int).tolist(),
            "flags": self.flags.astype(int).tolist(),
            "ctx_pos": self.ctx_pos.astype(int).tolist(),
            "vocab": {
                "bins": self.bins,
                "sentinels": {"s_ctx": self.s_ctx, "e_ctx": self.e_ctx, "eos": self.eos},
            },
        }

    @classmethod
    def from_record(cls, rec: dict) -> "FimSequence":
        bins = int(rec["vocab"]["bins"])
        return cls(
            np.asarray(rec["tokens"], dtype=np.uint16),
            np.asarray(rec["flags"], dtype=np.uint8),
            np.asarray(rec["ctx_pos"], dtype=np.int32),
            bins,
        )

    # -- binary -------------------------------------------------------------

    def to_bytes(self) -> bytes:
        n = len(self.tokens)
        head = _MAGIC + struct.pack("<HHI", _VERSION, self.bins, n)
        return head + self.tokens.astype("<u2").tobytes() + self.flags.astype("u1").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "FimSequence":
        if data[:4] != _MAGIC:
            raise SequenceError("bad magic")
        ver, bins, n = struct.unpack_from("<HHI", data, 4)
        if ver != _VERSION:
            raise SequenceError(f"unsupported version {ver}")
        off = 4 + 8
        tokens = np.frombuffer(data, dtype="<u2", count=n, offset=off).astype(np.uint16)
        flags = np.frombuffer(data, dtype="u1", count=n, offset=off + 2 * n).astype(np.uint8)
        ctx_pos = np.full(n, -1, dtype=np.int32)
        ctx_idx = np.nonzero(flags & FLAG_CONTEXT)[0]
        ctx_pos[ctx_idx] = np.arange(len(ctx_idx), dtype=np.int32)
        return cls(tokens, flags, ctx_pos, int(bins))


def write_jsonl(seqs, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in seqs:
            fh.write(json.dumps(s.to_record(), separators=(",", ":")) + "\n")


def read_jsonl(path) -> list[FimSequence]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(FimSequence.from_record(json.loads(line)))
    return out
