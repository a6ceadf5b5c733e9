"""Keyed and unkeyed hash primitives.

Everything downstream (linkage keys, Bloom filters, bucket encodings,
attacks) is built from the functions here: SHA-256, HMAC-SHA256, a
Carter-Wegman universal hash family, double / enhanced-double hashing
derived from two independent digests, and bi-gram extraction for names.

All functions are pure and safe for unrestricted parallel use.
"""

from __future__ import annotations

import hashlib
import hmac as _hmac
import secrets
from collections import Counter
from dataclasses import dataclass
from random import Random
from typing import Iterable

# Mersenne prime 2^61 - 1: large enough for every output range used in the
# experiments, and cheap to reduce by.
MERSENNE_61 = (1 << 61) - 1

KEY_BYTES = 32

BOUNDARY = "_"


class HashConfigError(ValueError):
    """Raised for invalid hash-family parameters."""


# ---------------------------------------------------------------------------
# Seed derivation
# ---------------------------------------------------------------------------


def derive_seed(master_seed: int, *labels: object) -> int:
    """Derive an independent 64-bit seed from a master seed and labels.

    Labelled derivation keeps every consumer on its own stream: adding or
    reordering one experiment cannot perturb the randomness of another.
    """
    h = hashlib.sha256()
    h.update(str(int(master_seed)).encode())
    for label in labels:
        h.update(b"\x00")
        h.update(str(label).encode())
    return int.from_bytes(h.digest()[:8], "big")


def derive_rng(master_seed: int, *labels: object) -> Random:
    """A `random.Random` seeded via :func:`derive_seed`."""
    return Random(derive_seed(master_seed, *labels))


# ---------------------------------------------------------------------------
# Cryptographic hash / HMAC
# ---------------------------------------------------------------------------


def sha256_hex(data: bytes) -> str:
    """Hex digest of SHA-256 over ``data``."""
    return hashlib.sha256(data).hexdigest()


@dataclass(frozen=True)
class HmacKey:
    """A 32-byte HMAC secret with a short identifying label.

    The raw bytes must never appear in any report output; repr hides them.
    """

    key_bytes: bytes
    key_id: str = "default"

    def __post_init__(self) -> None:
        if len(self.key_bytes) != KEY_BYTES:
            raise HashConfigError(
                f"HMAC key must be {KEY_BYTES} bytes, got {len(self.key_bytes)}"
            )

    def __repr__(self) -> str:  # never leak key material
        return f"HmacKey(key_id={self.key_id!r})"

    @classmethod
    def generate(cls, key_id: str = "default") -> "HmacKey":
        """Fresh key from the OS CSPRNG. Use this outside of experiments."""
        return cls(secrets.token_bytes(KEY_BYTES), key_id)

    @classmethod
    def from_seed(cls, master_seed: int, key_id: str = "default") -> "HmacKey":
        """Deterministic experiment key derived from a run's master seed.

        Only for reproducible benchmark runs; real deployments must use
        :meth:`generate`.
        """
        raw = hashlib.sha256(f"hmac-key\x00{master_seed}\x00{key_id}".encode()).digest()
        return cls(raw, key_id)


def hmac_tag(key: HmacKey, message: bytes) -> bytes:
    """32-byte HMAC-SHA256 tag, deterministic per (key, message)."""
    return _hmac.digest(key.key_bytes, message, "sha256")


# ---------------------------------------------------------------------------
# Key files (key_id:hex lines). Keys are written/read, never printed.
# ---------------------------------------------------------------------------


def write_key_file(path: str, keys: Iterable[HmacKey]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key in keys:
            fh.write(f"{key.key_id}:{key.key_bytes.hex()}\n")


def read_key_file(path: str) -> list[HmacKey]:
    keys = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                key_id, hexpart = line.split(":", 1)
                keys.append(HmacKey(bytes.fromhex(hexpart), key_id))
            except (ValueError, HashConfigError) as exc:
                raise HashConfigError(f"bad key file line {lineno}: {exc}") from exc
    return keys


# ---------------------------------------------------------------------------
# Carter-Wegman universal hashing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UniversalHashParams:
    """Parameters for h(x) = ((a*x + b) mod p) mod L with p a large prime."""

    a: int
    b: int
    L: int
    p: int = MERSENNE_61

    def __post_init__(self) -> None:
        if self.p < MERSENNE_61:
            raise HashConfigError("p must be a large prime (>= 2^61 - 1)")
        if not 1 <= self.a < self.p:
            raise HashConfigError("a must be in [1, p-1]")
        if not 0 <= self.b < self.p:
            raise HashConfigError("b must be in [0, p-1]")
        if self.L < 1:
            raise HashConfigError("output range L must be positive")


def universal_hash(params: UniversalHashParams, x: int) -> int:
    return ((params.a * x + params.b) % params.p) % params.L


def random_universal_params(L: int, rng: Random) -> UniversalHashParams:
    return UniversalHashParams(a=rng.randrange(1, MERSENNE_61), b=rng.randrange(MERSENNE_61), L=L)


def universal_family(L: int, k: int, rng: Random) -> tuple[UniversalHashParams, ...]:
    """k independently drawn members of the family, one per Bloom index."""
    return tuple(random_universal_params(L, rng) for _ in range(k))


# ---------------------------------------------------------------------------
# Double hashing: g_i(x) = h1(x) + i*h2(x) + f(i) mod m
# ---------------------------------------------------------------------------

PLAIN = "plain"
ENHANCED = "enhanced"

# sha1/md5 is kept for fidelity with older record-linkage implementations;
# both are deprecated as cryptographic hashes, so the default derives the two
# values from disjoint slices of one SHA-512 digest.
HASH_PAIRS = ("sha512_split", "sha1_md5")


@dataclass(frozen=True)
class DoubleHashParams:
    m: int
    k: int
    enhancement: str = ENHANCED
    hash_pair: str = "sha512_split"

    def __post_init__(self) -> None:
        if self.m < 2:
            raise HashConfigError("filter length m must be >= 2")
        if self.k < 1:
            raise HashConfigError("number of hashes k must be >= 1")
        if self.enhancement not in (PLAIN, ENHANCED):
            raise HashConfigError(f"unknown enhancement {self.enhancement!r}")
        if self.hash_pair not in HASH_PAIRS:
            raise HashConfigError(f"unknown hash pair {self.hash_pair!r}")


def hash_pair_values(data: bytes, hash_pair: str = "sha512_split") -> tuple[int, int]:
    """The two 64-bit base hashes, big-endian from the leading digest bytes."""
    if hash_pair == "sha1_md5":
        h1 = hashlib.sha1(data, usedforsecurity=False).digest()
        h2 = hashlib.md5(data, usedforsecurity=False).digest()
    elif hash_pair == "sha512_split":
        digest = hashlib.sha512(data).digest()
        h1, h2 = digest[:8], digest[8:16]
    else:
        raise HashConfigError(f"unknown hash pair {hash_pair!r}")
    return int.from_bytes(h1[:8], "big"), int.from_bytes(h2[:8], "big")


def enhancement_term(enhancement: str, i: int) -> int:
    # Enhanced double hashing adds the Dillinger-Manolios triple (i^3 - i)/6.
    if enhancement == PLAIN:
        return 0
    return (i**3 - i) // 6


def double_hash_indices(params: DoubleHashParams, data: bytes) -> list[int]:
    h1, h2 = hash_pair_values(data, params.hash_pair)
    m = params.m
    return [
        (h1 + i * h2 + enhancement_term(params.enhancement, i)) % m
        for i in range(params.k)
    ]


# ---------------------------------------------------------------------------
# Bi-grams
# ---------------------------------------------------------------------------


def bigrams(name: str) -> frozenset[str]:
    """Distinct 2-grams of the boundary-padded name ``_name_``.

    >>> sorted(bigrams("ab"))
    ['_a', 'ab', 'b_']
    """
    if not name:
        raise ValueError("cannot take bi-grams of an empty name")
    padded = BOUNDARY + name + BOUNDARY
    return frozenset(padded[i : i + 2] for i in range(len(padded) - 1))


def bigram_counts(name: str) -> Counter:
    """Bi-grams of the padded name as a multiset (order lost, counts kept)."""
    if not name:
        raise ValueError("cannot take bi-grams of an empty name")
    padded = BOUNDARY + name + BOUNDARY
    return Counter(padded[i : i + 2] for i in range(len(padded) - 1))


def hashed_bigrams(name: str, key: HmacKey) -> frozenset[bytes]:
    """HMAC tag of each distinct bi-gram; the comparable form of a name."""
    return frozenset(hmac_tag(key, gram.encode()) for gram in bigrams(name))


def hashed_bigram_counts(name: str, key: HmacKey) -> Counter:
    counts = bigram_counts(name)
    return Counter({hmac_tag(key, gram.encode()): n for gram, n in counts.items()})
