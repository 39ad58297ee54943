"""Paillier cryptosystem, fixed-point encoding, and encrypted aggregation.

Multiplying two ciphertexts adds their plaintexts mod n, and raising a
ciphertext to an integer power multiplies its plaintext, which is exactly
what a sample-count-weighted parameter sum needs. We use the standard
g = n + 1 simplification, so encryption is ``(1 + m*n) * r^n mod n^2``.

Reals ride along as scaled residues: ``round(x * scale)`` mapped into
[0, n), with the upper half of the range decoding as negative. Every
weighted sum must keep its scaled magnitude below n/2 or the signed
mapping becomes ambiguous; that headroom is the caller's responsibility
and is enormous at the supported key sizes.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CryptoRangeError, InvalidInputError, KeyGenError
from .models import ModelArch, ModelParams

DEFAULT_SCALE = 1 << 40
KEY_BITS_CHOICES = (256, 512, 1024, 2048)
WIRE_MAGIC = b"FCS1"

_MR_ROUNDS = 40
_PRIME_SEARCH_CAP = 100_000
_SMALL_PRIMES = (3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47)


@dataclass(frozen=True)
class PaillierPublicKey:
    n: int

    @property
    def g(self) -> int:
        return self.n + 1

    @property
    def n_squared(self) -> int:
        return self.n * self.n

    @property
    def bits(self) -> int:
        return self.n.bit_length()


@dataclass(frozen=True)
class PaillierPrivateKey:
    lam: int  # lcm(p-1, q-1)
    mu: int  # inverse of L(g^lam mod n^2) mod n


def _is_probable_prime(candidate: int, rng: random.Random, rounds: int = _MR_ROUNDS) -> bool:
    """Miller-Rabin with witnesses drawn from the caller's stream."""
    if candidate < 2:
        return False
    for p in _SMALL_PRIMES:
        if candidate % p == 0:
            return candidate == p
    d = candidate - 1
    s = 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for _ in range(rounds):
        a = rng.randrange(2, candidate - 1)
        x = pow(a, d, candidate)
        if x == 1 or x == candidate - 1:
            continue
        for _ in range(s - 1):
            x = x * x % candidate
            if x == candidate - 1:
                break
        else:
            return False
    return True


def _random_prime(bits: int, rng: random.Random) -> int:
    # top two bits forced so p*q always reaches the full modulus width
    for _ in range(_PRIME_SEARCH_CAP):
        candidate = rng.getrandbits(bits) | (1 << (bits - 1)) | (1 << (bits - 2)) | 1
        if _is_probable_prime(candidate, rng):
            return candidate
    raise KeyGenError(f"no {bits}-bit prime found within {_PRIME_SEARCH_CAP} attempts")


def _l_func(u: int, n: int) -> int:
    return (u - 1) // n


def keypair_from_primes(p: int, q: int) -> tuple[PaillierPublicKey, PaillierPrivateKey]:
    """Build a keypair from explicit primes (tiny test keys included)."""
    if p == q:
        raise InvalidInputError("p and q must be distinct")
    n = p * q
    lam = math.lcm(p - 1, q - 1)
    n_squared = n * n
    mu = pow(_l_func(pow(n + 1, lam, n_squared), n), -1, n)
    return PaillierPublicKey(n), PaillierPrivateKey(lam, mu)


def keygen(bits: int, seed: int) -> tuple[PaillierPublicKey, PaillierPrivateKey]:
    """Seeded keypair with two distinct bits/2 probable primes."""
    if bits not in KEY_BITS_CHOICES:
        raise InvalidInputError(f"bits must be one of {KEY_BITS_CHOICES}, got {bits}")
    rng = random.Random(seed)
    p = _random_prime(bits // 2, rng)
    q = p
    while q == p:
        q = _random_prime(bits // 2, rng)
    return keypair_from_primes(p, q)


def encrypt(pk: PaillierPublicKey, m: int, rng: random.Random, r_value: int | None = None) -> int:
    """Encrypt m in [0, n); fresh randomness unless r_value is pinned."""
    if not 0 <= m < pk.n:
        raise CryptoRangeError(f"plaintext {m} outside [0, n)")
    n_squared = pk.n_squared
    if r_value is not None:
        r = r_value
    else:
        r = rng.randrange(1, pk.n)
        while math.gcd(r, pk.n) != 1:
            r = rng.randrange(1, pk.n)
    return (1 + m * pk.n) % n_squared * pow(r, pk.n, n_squared) % n_squared


def decrypt(sk: PaillierPrivateKey, pk: PaillierPublicKey, c: int) -> int:
    if not 0 <= c < pk.n_squared:
        raise CryptoRangeError(f"ciphertext outside [0, n^2)")
    return _l_func(pow(c, sk.lam, pk.n_squared), pk.n) * sk.mu % pk.n


def add_cipher(pk: PaillierPublicKey, c1: int, c2: int) -> int:
    """Ciphertext of the plaintext sum."""
    n_squared = pk.n_squared
    if not (0 <= c1 < n_squared and 0 <= c2 < n_squared):
        raise CryptoRangeError("ciphertext outside [0, n^2)")
    return c1 * c2 % n_squared


def scalar_mul(pk: PaillierPublicKey, c: int, k: int) -> int:
    """Ciphertext of k times the plaintext, k a non-negative integer."""
    if not 0 <= c < pk.n_squared:
        raise CryptoRangeError("ciphertext outside [0, n^2)")
    if k < 0:
        raise CryptoRangeError(f"scalar must be >= 0, got {k}")
    return pow(c, k, pk.n_squared)


@dataclass(frozen=True)
class FixedPointCodec:
    """Signed fixed-point mapping of reals into [0, modulus)."""

    modulus: int
    scale: int = DEFAULT_SCALE

    def __post_init__(self):
        if self.scale < 1:
            raise InvalidInputError(f"scale must be >= 1, got {self.scale}")
        if self.modulus < 4:
            raise InvalidInputError(f"modulus must be >= 4, got {self.modulus}")


def encode_real(codec: FixedPointCodec, x: float) -> int:
    x = float(x)
    if not math.isfinite(x):
        raise CryptoRangeError(f"cannot encode non-finite value {x}")
    scaled = round(x * codec.scale)  # exact: scale is a power of two
    if 2 * abs(scaled) >= codec.modulus:
        raise CryptoRangeError(f"|{x}| * scale exceeds modulus/2")
    return scaled % codec.modulus


def decode_real(codec: FixedPointCodec, v: int) -> float:
    if not 0 <= v < codec.modulus:
        raise CryptoRangeError(f"encoded value outside [0, modulus)")
    if v > codec.modulus // 2:
        v -= codec.modulus
    return v / codec.scale


@dataclass
class CipherVector:
    """Encrypted parameter vector plus the key width it was made under."""

    elements: list[int]
    key_bits: int

    def __len__(self) -> int:
        return len(self.elements)


def encrypt_params(
    pk: PaillierPublicKey,
    codec: FixedPointCodec,
    params: ModelParams,
    rng: random.Random,
) -> CipherVector:
    """Elementwise encode-then-encrypt of a parameter vector."""
    elements = []
    for i, x in enumerate(params.values):
        try:
            elements.append(encrypt(pk, encode_real(codec, float(x)), rng))
        except CryptoRangeError as exc:
            raise CryptoRangeError(f"coordinate {i}: {exc}") from exc
    return CipherVector(elements, pk.bits)


def aggregate_encrypted(
    pk: PaillierPublicKey, updates: Sequence[tuple[CipherVector, int]]
) -> tuple[CipherVector, int]:
    """Homomorphic weighted sum: ciphertexts of sum(count_i * w_i).

    Weighting by integer sample counts keeps everything inside the additive
    homomorphism; the division by the total count happens after decryption.
    The caller must keep sum(count_i * max|w_i|) * scale below n/2.
    """
    if not updates:
        raise InvalidInputError("no updates to aggregate")
    length = len(updates[0][0])
    n_squared = pk.n_squared
    acc = [1] * length  # deterministic encryption of zero
    total = 0
    for cv, count in updates:
        if len(cv) != length:
            raise InvalidInputError(
                f"cipher vector length {len(cv)} does not match {length}"
            )
        if count < 1:
            raise InvalidInputError(f"sample count must be >= 1, got {count}")
        total += count
        for j, c in enumerate(cv.elements):
            acc[j] = acc[j] * pow(c, count, n_squared) % n_squared
    return CipherVector(acc, pk.bits), total


def decrypt_params(
    sk: PaillierPrivateKey,
    pk: PaillierPublicKey,
    codec: FixedPointCodec,
    cv: CipherVector,
    divisor: int,
    arch: ModelArch,
) -> ModelParams:
    """Elementwise decrypt and decode, then divide by the total count."""
    if divisor < 1:
        raise InvalidInputError(f"divisor must be >= 1, got {divisor}")
    if len(cv) != arch.param_count:
        raise InvalidInputError(
            f"cipher vector length {len(cv)} does not match {arch.param_count} params"
        )
    values = np.array(
        [decode_real(codec, decrypt(sk, pk, c)) for c in cv.elements], dtype=np.float64
    )
    return ModelParams(arch, values / divisor)


def serialize_cipher_vector(cv: CipherVector) -> bytes:
    """FCS1 wire format: magic, key bits, count, length-prefixed elements.

    All integers are big-endian; element payloads are minimal-length so the
    roundtrip is bytewise exact.
    """
    out = bytearray(WIRE_MAGIC)
    out += cv.key_bits.to_bytes(4, "big")
    out += len(cv.elements).to_bytes(4, "big")
    for el in cv.elements:
        if el < 0:
            raise InvalidInputError("ciphertext elements must be non-negative")
        raw = el.to_bytes(max(1, (el.bit_length() + 7) // 8), "big")
        out += len(raw).to_bytes(4, "big")
        out += raw
    return bytes(out)


def deserialize_cipher_vector(blob: bytes) -> CipherVector:
    if blob[:4] != WIRE_MAGIC:
        raise InvalidInputError("bad magic bytes, not an FCS1 payload")
    if len(blob) < 12:
        raise InvalidInputError("truncated FCS1 header")
    key_bits = int.from_bytes(blob[4:8], "big")
    count = int.from_bytes(blob[8:12], "big")
    offset = 12
    elements = []
    for _ in range(count):
        if offset + 4 > len(blob):
            raise InvalidInputError("truncated element length prefix")
        size = int.from_bytes(blob[offset : offset + 4], "big")
        offset += 4
        if offset + size > len(blob):
            raise InvalidInputError("truncated element payload")
        elements.append(int.from_bytes(blob[offset : offset + size], "big"))
        offset += size
    if offset != len(blob):
        raise InvalidInputError(f"{len(blob) - offset} trailing bytes after payload")
    return CipherVector(elements, key_bits)
