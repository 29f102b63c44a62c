"""Hashing and quorum signatures.

The hash is SHA-256.  Individual signatures are Ed25519 with keys derived
deterministically from a 32-byte seed.  A :class:`QuorumSignature` carries a
signer bitmap over the committee and the concatenation of the signers'
signatures in committee order; :func:`quorum_verify` checks the voting weight
of the bitmap against a threshold and then every listed signature.  The
interface mirrors an aggregate BLS signature so a pairing backend can be
dropped in behind ``aggregate``/``quorum_verify``.
"""

from __future__ import annotations

import hashlib
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Iterator, Optional, Sequence

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

from .encoding import DecodeError, Reader, Writer

SEED_SIZE = 32
PUBLIC_KEY_SIZE = 32
SIGNATURE_SIZE = 64
DEFAULT_THRESHOLD = Fraction(2, 3)


class HashCount:
    def __init__(self) -> None:
        self.n = 0


_active_counters: ContextVar[tuple[HashCount, ...]] = ContextVar("_active_counters", default=())


@contextmanager
def count_hashes() -> Iterator[HashCount]:
    """Count every :func:`hash_bytes` call made inside the block (nests)."""
    counter = HashCount()
    token = _active_counters.set(_active_counters.get() + (counter,))
    try:
        yield counter
    finally:
        _active_counters.reset(token)


def hash_bytes(data: bytes) -> bytes:
    for counter in _active_counters.get():
        counter.n += 1
    return hashlib.sha256(data).digest()


@dataclass(frozen=True)
class KeyPair:
    secret: bytes = field(repr=False)
    public: bytes


@lru_cache(maxsize=4096)
def _private_key(secret: bytes) -> Ed25519PrivateKey:
    return Ed25519PrivateKey.from_private_bytes(secret)


@lru_cache(maxsize=4096)
def keygen(seed: bytes) -> KeyPair:
    if len(seed) != SEED_SIZE:
        raise ValueError(f"seed must be {SEED_SIZE} bytes")
    public = _private_key(seed).public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)
    return KeyPair(secret=bytes(seed), public=public)


def sign(secret: bytes, message: bytes) -> bytes:
    if not message:
        raise ValueError("cannot sign an empty message")
    return _private_key(secret).sign(message)


def verify(public: bytes, message: bytes, signature: bytes) -> bool:
    if len(public) != PUBLIC_KEY_SIZE or len(signature) != SIGNATURE_SIZE:
        return False
    try:
        Ed25519PublicKey.from_public_bytes(public).verify(signature, message)
    except (InvalidSignature, ValueError):
        return False
    return True


@dataclass(frozen=True)
class QuorumSignature:
    agg: bytes
    bitmap: tuple[bool, ...]

    @property
    def signers(self) -> tuple[int, ...]:
        return tuple(i for i, bit in enumerate(self.bitmap) if bit)

    def bitstring(self) -> str:
        return "".join("1" if b else "0" for b in self.bitmap)

    def write(self, w: Writer) -> None:
        w.u32(len(self.bitmap))
        packed = bytearray((len(self.bitmap) + 7) // 8)
        for i, bit in enumerate(self.bitmap):
            if bit:
                packed[i // 8] |= 0x80 >> (i % 8)
        w.raw(bytes(packed))
        w.blob(self.agg)

    @classmethod
    def read(cls, r: Reader) -> "QuorumSignature":
        n = r.u32()
        packed = r.raw((n + 7) // 8)
        bitmap = tuple(bool(packed[i // 8] & (0x80 >> (i % 8))) for i in range(n))
        # padding bits past the committee must be zero
        if n % 8 and packed[-1] & (0xFF >> (n % 8)):
            raise DecodeError("nonzero bitmap padding")
        return cls(agg=r.blob(), bitmap=bitmap)

    def encode(self) -> bytes:
        w = Writer()
        self.write(w)
        return w.getvalue()

    @classmethod
    def decode(cls, data: bytes) -> "QuorumSignature":
        r = Reader(data)
        q = cls.read(r)
        r.done()
        return q


def aggregate(sigs: Iterable[tuple[int, bytes]], committee_size: int) -> QuorumSignature:
    by_index: dict[int, bytes] = {}
    for index, sig in sigs:
        if not 0 <= index < committee_size:
            raise ValueError(f"signer index {index} outside committee of {committee_size}")
        if index in by_index:
            raise ValueError(f"duplicate signer index {index}")
        by_index[index] = sig
    bitmap = tuple(i in by_index for i in range(committee_size))
    agg = b"".join(by_index[i] for i in sorted(by_index))
    return QuorumSignature(agg=agg, bitmap=bitmap)


def check_threshold(threshold: Fraction) -> Fraction:
    threshold = Fraction(threshold)
    if not 0 < threshold <= 1:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    return threshold


def quorum_verify(
    qsig: QuorumSignature,
    pks: Sequence[bytes],
    message: bytes,
    threshold: Fraction = DEFAULT_THRESHOLD,
    weights: Optional[Sequence[Fraction | int]] = None,
) -> bool:
    """True iff the signers carry ``threshold`` of the weight and all signed ``message``."""
    if len(qsig.bitmap) != len(pks):
        raise ValueError(f"bitmap covers {len(qsig.bitmap)} keys, committee has {len(pks)}")
    threshold = check_threshold(threshold)
    if weights is None:
        weights = [1] * len(pks)
    elif len(weights) != len(pks):
        raise ValueError("one weight per public key required")
    total = sum(Fraction(w) for w in weights)
    signers = qsig.signers
    signed = sum(Fraction(weights[i]) for i in signers)
    if total <= 0 or signed / total < threshold:
        return False
    if len(qsig.agg) != SIGNATURE_SIZE * len(signers):
        return False
    for k, i in enumerate(signers):
        sig = qsig.agg[k * SIGNATURE_SIZE : (k + 1) * SIGNATURE_SIZE]
        if not verify(pks[i], message, sig):
            return False
    return True


def encode_keys(pks: Sequence[bytes]) -> bytes:
    w = Writer().u32(len(pks))
    for pk in pks:
        w.raw(pk)
    return w.getvalue()


def committee_commitment(pks: Sequence[bytes]) -> bytes:
    """Digest pinning an ordered committee; the contract stores one per epoch."""
    return hash_bytes(encode_keys(pks))

