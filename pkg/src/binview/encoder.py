"""Seeded feature-hashing token encoder with an optional precomputed-vector table.

Each token hashes ``hashes_per_token`` times with FNV-1a-64 over
``seed (8 bytes LE) || utf-8 token || i (4 bytes LE)``. The low bits pick a
coordinate (``h mod dimension``), bit 63 picks the sign. Sums use
``math.fsum`` so results never depend on token order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyInput, EmptyToken, FormatError

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1

HASHING_ENCODER_ID = "hashing-v1"
VECTORS_FORMAT = "bin2vec-vectors-v1"


def fnv1a_64(data: bytes, h: int = FNV64_OFFSET) -> int:
    for byte in data:
        h ^= byte
        h = (h * FNV64_PRIME) & _MASK64
    return h


@dataclass(frozen=True)
class EncoderConfig:
    encoder_id: str = HASHING_ENCODER_ID
    dimension: int = 384
    seed: int = 42
    hashes_per_token: int = 4

    def __post_init__(self):
        if self.dimension < 8:
            raise ValueError("dimension must be >= 8")
        if self.hashes_per_token < 1:
            raise ValueError("hashes_per_token must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")

    def to_dict(self) -> dict:
        return {"encoder_id": self.encoder_id, "dimension": self.dimension,
                "seed": self.seed, "hashes_per_token": self.hashes_per_token}

    @classmethod
    def from_dict(cls, d: Mapping) -> "EncoderConfig":
        return cls(d["encoder_id"], int(d["dimension"]), int(d["seed"]), int(d["hashes_per_token"]))


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    values: np.ndarray
    normalized: bool
    encoder_id: str

    def __post_init__(self):
        self.values.setflags(write=False)

    @property
    def dimension(self) -> int:
        return int(self.values.shape[0])

    @property
    def is_zero(self) -> bool:
        return not np.any(self.values)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingVector):
            return NotImplemented
        return (self.normalized == other.normalized and self.encoder_id == other.encoder_id
                and np.array_equal(self.values, other.values))

    @classmethod
    def zero(cls, dimension: int, encoder_id: str) -> "EmbeddingVector":
        """The flagged-zero vector used for absent evidence."""
        return cls(np.zeros(dimension), False, encoder_id)


def l2_norm(values: np.ndarray) -> float:
    return math.sqrt(math.fsum(values * values))


def l2_normalize(values: np.ndarray, encoder_id: str) -> EmbeddingVector:
    """Scale to unit length; an all-zero input stays zero and unflagged."""
    norm = l2_norm(values)
    if norm == 0.0:
        return EmbeddingVector.zero(values.shape[0], encoder_id)
    return EmbeddingVector(np.asarray(values, dtype=float) / norm, True, encoder_id)


@lru_cache(maxsize=65536)
def _hash_image(token: str, seed: int, dimension: int, hashes: int) -> tuple[tuple[int, int], ...]:
    prefix = fnv1a_64(seed.to_bytes(8, "little") + token.encode("utf-8"))
    acc: dict[int, int] = {}
    for i in range(hashes):
        h = fnv1a_64(i.to_bytes(4, "little"), prefix)
        pos = h % dimension
        acc[pos] = acc.get(pos, 0) + (-1 if h >> 63 else 1)
    return tuple(sorted((p, v) for p, v in acc.items() if v))


def hash_image(token: str, config: EncoderConfig) -> np.ndarray:
    """Unnormalized signed-count image of one token."""
    if not token:
        raise EmptyToken("cannot encode an empty token")
    out = np.zeros(config.dimension)
    for pos, val in _hash_image(token, config.seed, config.dimension, config.hashes_per_token):
        out[pos] = val
    return out


def hash_encode_token(token: str, config: EncoderConfig) -> EmbeddingVector:
    return l2_normalize(hash_image(token, config), HASHING_ENCODER_ID)


class Encoder:
    """Hashing encoder; subclasses override :meth:`image` for other sources."""

    def __init__(self, config: EncoderConfig | None = None):
        self.config = config or EncoderConfig()

    @property
    def encoder_id(self) -> str:
        return self.config.encoder_id

    @property
    def dimension(self) -> int:
        return self.config.dimension

    def image(self, token: str) -> np.ndarray:
        return hash_image(token, self.config)

    def encode(self, token: str) -> EmbeddingVector:
        return l2_normalize(self.image(token), self.encoder_id)

    def zero(self) -> EmbeddingVector:
        return EmbeddingVector.zero(self.dimension, self.encoder_id)


class ExternalEncoder(Encoder):
    """Looks tokens up in a precomputed table; misses fall back to hashing."""

    def __init__(self, table: Mapping[str, np.ndarray], name: str, config: EncoderConfig | None = None):
        base = config or EncoderConfig()
        super().__init__(EncoderConfig(f"external:{name}", base.dimension, base.seed, base.hashes_per_token))
        self._hashing = EncoderConfig(HASHING_ENCODER_ID, base.dimension, base.seed, base.hashes_per_token)
        for token, vec in table.items():
            if vec.shape != (self.dimension,):
                raise DimensionMismatch(
                    f"vector for {token!r} has dimension {vec.shape[0]}, encoder expects {self.dimension}"
                )
        self.table = dict(table)

    def image(self, token: str) -> np.ndarray:
        if not token:
            raise EmptyToken("cannot encode an empty token")
        vec = self.table.get(token)
        if vec is not None and np.any(vec):
            return vec / l2_norm(vec)
        return hash_encode_token(token, self._hashing).values


def load_vector_table(path: str | Path) -> dict[str, np.ndarray]:
    """Read a ``bin2vec-vectors-v1`` JSON-lines file."""
    table: dict[str, np.ndarray] = {}
    dim = None
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            token, vector = rec["token"], np.asarray(rec["vector"], dtype=float)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{path}:{lineno}: bad vector record ({exc})") from None
        if vector.ndim != 1:
            raise FormatError(f"{path}:{lineno}: vector must be a flat list")
        if dim is None:
            dim = vector.shape[0]
        elif vector.shape[0] != dim:
            raise DimensionMismatch(f"{path}:{lineno}: dimension {vector.shape[0]} differs from {dim}")
        table[token] = vector
    return table


def external_encode(token: str, table: Mapping[str, np.ndarray], config: EncoderConfig,
                    name: str = "table") -> EmbeddingVector:
    return ExternalEncoder(table, name, config).encode(token)


def _aggregate(tokens: Sequence[str], weights: Sequence[float] | None) -> dict[str, float]:
    if weights is not None and len(weights) != len(tokens):
        raise ValueError("weights must match tokens in length")
    grouped: dict[str, list[float]] = {}
    for i, tok in enumerate(tokens):
        w = 1.0 if weights is None else float(weights[i])
        if w <= 0:
            raise ValueError("weights must be positive")
        grouped.setdefault(tok, []).append(w)
    return {tok: math.fsum(ws) for tok, ws in grouped.items()}


def multiset_image(tokens: Sequence[str], weights: Sequence[float] | None, encoder: Encoder) -> np.ndarray:
    """Weighted sum of per-token images, before normalization."""
    grouped = _aggregate(tokens, weights)
    if type(encoder) is Encoder:
        cfg = encoder.config
        terms: dict[int, list[float]] = {}
        for tok, w in grouped.items():
            if not tok:
                raise EmptyToken("cannot encode an empty token")
            for pos, val in _hash_image(tok, cfg.seed, cfg.dimension, cfg.hashes_per_token):
                terms.setdefault(pos, []).append(w * val)
        out = np.zeros(cfg.dimension)
        for pos, vals in terms.items():
            out[pos] = math.fsum(vals)
        return out

    rows = np.array([w * encoder.image(tok) for tok, w in grouped.items()])
    return np.array([math.fsum(col) for col in rows.T]) if len(rows) else np.zeros(encoder.dimension)


def encode_token_multiset(
    tokens: Iterable[str],
    weights: Sequence[float] | None = None,
    encoder: Encoder | None = None,
    allow_empty: bool = False,
) -> EmbeddingVector:
    encoder = encoder or Encoder()
    tokens = list(tokens)
    if not tokens:
        if allow_empty:
            return encoder.zero()
        raise EmptyInput("token multiset is empty")
    return l2_normalize(multiset_image(tokens, weights, encoder), encoder.encoder_id)
