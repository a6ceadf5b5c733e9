"""Envelope encryption of linkage fields, key secret-sharing, and the
encrypt -> link -> shuffle pipeline demonstration.

The hybrid scheme wraps a fresh random data key for every blob: X25519
against the recipient's public key, HKDF-SHA256 to a wrapping key, and
AES-256-GCM for both the wrapped key and the payload. Encryption is
randomized (two encryptions of one plaintext differ) and authenticated
(tampering or the wrong private key fails loudly, never silently).

The recipient's private key can be split with Shamir threshold sharing
over a 256-bit prime field: any t shares reconstruct it exactly, fewer
raise, and single shares are uniform noise.
"""

from __future__ import annotations

import secrets
import struct
from dataclasses import dataclass
from random import Random, SystemRandom
from typing import Sequence

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.hashes import SHA256
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from .evalbench import EvalResult, evaluate
from .hashcore import HmacKey, derive_rng, derive_seed
from .linkkeys import LinkageKeySpec, build_index, default_spec_suite
from .linker import FIRST_UNIQUE, MatchDecision, link_dataset
from .model import Dataset, PersonRecord
from .synthgen import shuffle as shuffle_dataset

_FILE_MAGIC = b"PPRLENV1"

# Shamir parameters: a 256-bit prime field, secrets chunked into 31-byte
# limbs so every limb value is strictly below the modulus.
SHARE_PRIME = 2**256 - 189
_LIMB_BYTES = 31
_WORD_BYTES = 32


class EnvelopeError(ValueError):
    """Raised for undecryptable blobs, malformed files, or bad share sets."""


@dataclass(frozen=True)
class Keypair:
    public_key: bytes
    private_key: bytes

    def __repr__(self) -> str:  # private half stays out of logs
        return f"Keypair(public-key={self.public_key.hex()[:16]}..)"


def _rng_bytes(rng: Random | None, n: int) -> bytes:
    if rng is None:
        return secrets.token_bytes(n)
    return rng.randbytes(n)


def generate_keypair(rng: Random | None = None) -> Keypair:
    """X25519 keypair; pass a seeded rng only for reproducible experiments."""
    private = X25519PrivateKey.from_private_bytes(_rng_bytes(rng, 32))
    return Keypair(
        public_key=private.public_key().public_bytes_raw(),
        private_key=private.private_bytes_raw(),
    )


def _wrap_key(shared: bytes, eph_pub: bytes, recipient_pub: bytes) -> bytes:
    return HKDF(
        algorithm=SHA256(),
        length=32,
        salt=None,
        info=b"pprlkit-envelope-v1" + eph_pub + recipient_pub,
    ).derive(shared)


def _encode_payload(fields: Sequence[bytes]) -> bytes:
    out = [struct.pack("<I", len(fields))]
    for field in fields:
        out.append(struct.pack("<I", len(field)))
        out.append(field)
    return b"".join(out)


def _decode_payload(payload: bytes) -> list[bytes]:
    try:
        (count,) = struct.unpack_from("<I", payload, 0)
        offset = 4
        fields = []
        for _ in range(count):
            (length,) = struct.unpack_from("<I", payload, offset)
            offset += 4
            fields.append(payload[offset : offset + length])
            if len(fields[-1]) != length:
                raise EnvelopeError("truncated payload")
            offset += length
        if offset != len(payload):
            raise EnvelopeError("trailing bytes after payload fields")
        return fields
    except struct.error as exc:
        raise EnvelopeError(f"malformed payload: {exc}") from exc


def envelope_encrypt(public_key: bytes, fields: Sequence[bytes], rng: Random | None = None) -> bytes:
    """Encrypt a field list under a fresh data key wrapped to the recipient.

    Blob layout: eph_pub(32) | wrap_nonce(12) | wrapped_key(48) |
    payload_nonce(12) | ciphertext.
    """
    recipient = X25519PublicKey.from_public_bytes(public_key)
    data_key = _rng_bytes(rng, 32)
    eph_private = X25519PrivateKey.from_private_bytes(_rng_bytes(rng, 32))
    eph_pub = eph_private.public_key().public_bytes_raw()
    wrap_nonce = _rng_bytes(rng, 12)
    payload_nonce = _rng_bytes(rng, 12)
    wrapping_key = _wrap_key(eph_private.exchange(recipient), eph_pub, public_key)
    wrapped = AESGCM(wrapping_key).encrypt(wrap_nonce, data_key, eph_pub)
    ciphertext = AESGCM(data_key).encrypt(payload_nonce, _encode_payload(fields), eph_pub)
    return eph_pub + wrap_nonce + wrapped + payload_nonce + ciphertext


def envelope_decrypt(private_key: bytes, blob: bytes) -> list[bytes]:
    if len(blob) < 32 + 12 + 48 + 12 + 16:
        raise EnvelopeError("blob too short to be an envelope")
    eph_pub = blob[:32]
    wrap_nonce = blob[32:44]
    wrapped = blob[44:92]
    payload_nonce = blob[92:104]
    ciphertext = blob[104:]
    private = X25519PrivateKey.from_private_bytes(private_key)
    recipient_pub = private.public_key().public_bytes_raw()
    wrapping_key = _wrap_key(
        private.exchange(X25519PublicKey.from_public_bytes(eph_pub)), eph_pub, recipient_pub
    )
    try:
        data_key = AESGCM(wrapping_key).decrypt(wrap_nonce, wrapped, eph_pub)
        payload = AESGCM(data_key).decrypt(payload_nonce, ciphertext, eph_pub)
    except InvalidTag as exc:
        raise EnvelopeError("decryption failed: wrong key or tampered blob") from exc
    return _decode_payload(payload)


# ---------------------------------------------------------------------------
# Shamir secret sharing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SecretShares:
    shares: tuple[tuple[int, bytes], ...]
    threshold: int
    total: int


def _limbs(secret: bytes) -> list[int]:
    return [
        int.from_bytes(secret[i : i + _LIMB_BYTES], "big")
        for i in range(0, len(secret), _LIMB_BYTES)
    ]


def split_key(secret: bytes, threshold: int, total: int, rng: Random | None = None) -> SecretShares:
    """Shamir-share ``secret`` so any ``threshold`` of ``total`` recover it.

    Each 31-byte limb gets its own random polynomial of degree t-1; a share
    carries the secret length, the threshold, and one field element per
    limb, so a bare share subset is self-describing.
    """
    if not 1 <= threshold <= total:
        raise EnvelopeError(f"need 1 <= threshold <= total, got ({threshold}, {total})")
    if not secret:
        raise EnvelopeError("cannot share an empty secret")
    if len(secret) > 0xFFFF:
        raise EnvelopeError("secret too long")
    limbs = _limbs(secret)
    polynomials = [
        [limb] + [int.from_bytes(_rng_bytes(rng, 32), "big") % SHARE_PRIME for _ in range(threshold - 1)]
        for limb in limbs
    ]
    shares = []
    for x in range(1, total + 1):
        parts = [struct.pack(">HB", len(secret), threshold)]
        for coefficients in polynomials:
            value = 0
            for coefficient in reversed(coefficients):  # Horner
                value = (value * x + coefficient) % SHARE_PRIME
            parts.append(value.to_bytes(_WORD_BYTES, "big"))
        shares.append((x, b"".join(parts)))
    return SecretShares(tuple(shares), threshold, total)


def recombine(shares: Sequence[tuple[int, bytes]]) -> bytes:
    """Reconstruct the secret from any >= threshold distinct shares."""
    if not shares:
        raise EnvelopeError("no shares supplied")
    seen: dict[int, bytes] = {}
    for index, raw in shares:
        if index in seen and seen[index] != raw:
            raise EnvelopeError(f"conflicting shares for index {index}")
        seen[index] = raw
    headers = {raw[:3] for raw in seen.values()}
    if len(headers) != 1:
        raise EnvelopeError("shares disagree on secret length or threshold")
    secret_len, threshold = struct.unpack(">HB", headers.pop())
    if len(seen) < threshold:
        raise EnvelopeError(
            f"insufficient shares: got {len(seen)}, reconstruction threshold is {threshold}"
        )
    n_limbs = (secret_len + _LIMB_BYTES - 1) // _LIMB_BYTES
    points = sorted(seen.items())[:threshold]
    xs = [x for x, _ in points]
    secret = bytearray()
    for limb_idx in range(n_limbs):
        value = 0
        for position, (x_i, raw) in enumerate(points):
            start = 3 + limb_idx * _WORD_BYTES
            y_i = int.from_bytes(raw[start : start + _WORD_BYTES], "big")
            numerator = denominator = 1
            for other, x_j in enumerate(xs):
                if other == position:
                    continue
                numerator = numerator * (-x_j) % SHARE_PRIME
                denominator = denominator * (x_i - x_j) % SHARE_PRIME
            value = (value + y_i * numerator * pow(denominator, -1, SHARE_PRIME)) % SHARE_PRIME
        limb_len = min(_LIMB_BYTES, secret_len - limb_idx * _LIMB_BYTES)
        secret += value.to_bytes(limb_len, "big")
    return bytes(secret)


def write_shares_file(shares: SecretShares, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for index, raw in shares.shares:
            fh.write(f"{index}:{raw.hex()}\n")


def read_shares_file(path: str) -> list[tuple[int, bytes]]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                index, hexpart = line.split(":", 1)
                out.append((int(index), bytes.fromhex(hexpart)))
            except ValueError as exc:
                raise EnvelopeError(f"bad share line {lineno}: {exc}") from exc
    return out


# ---------------------------------------------------------------------------
# Encrypted linkage file
# ---------------------------------------------------------------------------


def record_fields(record: PersonRecord) -> list[bytes]:
    """Name and linking variables as the encrypted payload field list."""
    return [
        record.first_name.encode(),
        (record.middle_initial or "").encode(),
        record.last_name.encode(),
        str(record.yob).encode(),
        record.sex.encode(),
        record.meshblock.encode(),
        record.sa3.encode(),
    ]


def record_from_fields(row_id: int, fields: Sequence[bytes]) -> PersonRecord:
    if len(fields) != 7:
        raise EnvelopeError(f"expected 7 linkage fields, got {len(fields)}")
    first, middle, last, yob, sex, meshblock, sa3 = (f.decode() for f in fields)
    return PersonRecord(
        row_id=row_id,
        first_name=first,
        middle_initial=middle or None,
        last_name=last,
        yob=int(yob),
        sex=sex,
        meshblock=meshblock,
        sa3=sa3,
    )


def write_linkage_file(blobs: Sequence[bytes]) -> bytes:
    out = [_FILE_MAGIC, struct.pack("<I", len(blobs))]
    for blob in blobs:
        out.append(struct.pack("<I", len(blob)))
        out.append(blob)
    return b"".join(out)


def read_linkage_file(data: bytes) -> list[bytes]:
    if data[: len(_FILE_MAGIC)] != _FILE_MAGIC:
        raise EnvelopeError("not a linkage file: bad magic")
    offset = len(_FILE_MAGIC)
    (count,) = struct.unpack_from("<I", data, offset)
    offset += 4
    blobs = []
    for _ in range(count):
        (length,) = struct.unpack_from("<I", data, offset)
        offset += 4
        blobs.append(data[offset : offset + length])
        if len(blobs[-1]) != length:
            raise EnvelopeError("truncated linkage file")
        offset += length
    return blobs


# ---------------------------------------------------------------------------
# Pipeline demonstration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PipelineResult:
    encrypted_file: bytes
    analysis_handles: tuple[int, ...]  # row ids travelling outside the envelope
    decisions: tuple[MatchDecision, ...]
    output_rows: tuple[tuple[int, int | None], ...]  # shuffled (query, match)
    eval_result: EvalResult


def pipeline_demo(
    dataset: Dataset,
    linker_keypair: Keypair,
    seed: int,
    specs: Sequence[LinkageKeySpec] | None = None,
) -> PipelineResult:
    """Run the whole choreography in-process with role-separated artifacts.

    The name manager encrypts each incoming record's names and linking
    variables to the linker's public key (analysis fields travel separately
    as row-id handles); the linker decrypts, links against the reference
    index on plaintext, and emits decisions in a shuffled order so output
    position leaks nothing about input position.
    """
    specs = list(specs) if specs is not None else default_spec_suite()
    hmac_key = HmacKey.from_seed(derive_seed(seed, "pipeline-hmac"), "pipeline")
    encrypt_rng = derive_rng(seed, "pipeline-encrypt")

    incoming = shuffle_dataset(dataset, derive_seed(seed, "pipeline-incoming"))
    blobs = [
        envelope_encrypt(linker_keypair.public_key, record_fields(record), encrypt_rng)
        for record in incoming
    ]
    encrypted_file = write_linkage_file(blobs)
    handles = tuple(record.row_id for record in incoming)

    # Linker role: decrypt, then deterministic indexed linking on plaintext.
    decrypted = [
        record_from_fields(row_id, envelope_decrypt(linker_keypair.private_key, blob))
        for row_id, blob in zip(handles, read_linkage_file(encrypted_file))
    ]
    index = build_index(dataset, specs, hmac_key)
    decisions = link_dataset(
        Dataset(tuple(decrypted), provenance="decrypted"), index, specs, hmac_key,
        method=FIRST_UNIQUE,
    )
    eval_result = evaluate(decisions, "exact", FIRST_UNIQUE, dataset.row_ids())

    output = [(d.query_row_id, d.matched_row_id) for d in decisions]
    derive_rng(seed, "pipeline-output").shuffle(output)
    return PipelineResult(
        encrypted_file=encrypted_file,
        analysis_handles=handles,
        decisions=tuple(decisions),
        output_rows=tuple(output),
        eval_result=eval_result,
    )


def system_rng() -> Random:
    """OS-entropy RNG with the Random interface, for non-experiment use."""
    return SystemRandom()
