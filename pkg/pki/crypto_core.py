"""
Deterministic crypto primitives and the canonical TLV encoding
File: pki/crypto_core.py

Every signed or hashed structure in the repo is built from a CanonicalRecord:
per field, a 2-byte big-endian tag, a 4-byte big-endian value length, then the
value bytes. Tags must be strictly increasing.
"""
import hashlib
import struct
from dataclasses import dataclass
from typing import Iterable, List, Mapping, NewType, Sequence, Tuple, Union

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric import ed25519

from utils.errors import InvalidSeed, MalformedRecord, NonCanonicalOrder

Hash32 = NewType("Hash32", bytes)

SEED_LENGTH = 32
SIGNATURE_LENGTH = 64
SIGNATURE_ALGORITHM = "Ed25519-SHA256"

_HEADER = struct.Struct(">HI")
_MAX_TAG = 0xFFFF
_MAX_VALUE = 0xFFFFFFFF


@dataclass(frozen=True)
class KeyPair:
    """Ed25519 key material; private_key is the 32-byte seed"""
    public_key: bytes
    private_key: bytes

    def sign(self, message: bytes) -> bytes:
        return sign(self.private_key, message)


def generate_keypair(seed: bytes) -> KeyPair:
    """
    Derive an Ed25519 keypair from a 32-byte seed

    Args:
        seed: Exactly 32 bytes

    Returns:
        KeyPair, byte-identical for identical seeds

    Raises:
        InvalidSeed: If seed is not 32 bytes
    """
    if not isinstance(seed, (bytes, bytearray)) or len(seed) != SEED_LENGTH:
        raise InvalidSeed(f"seed must be {SEED_LENGTH} bytes")

    private = ed25519.Ed25519PrivateKey.from_private_bytes(bytes(seed))
    public = private.public_key().public_bytes(
        encoding=serialization.Encoding.Raw,
        format=serialization.PublicFormat.Raw,
    )
    return KeyPair(public_key=public, private_key=bytes(seed))


def sign(private_key: bytes, message: bytes) -> bytes:
    """
    Sign a message (Ed25519 is deterministic, no per-signature randomness)

    Args:
        private_key: 32-byte seed
        message: Bytes to sign

    Returns:
        64-byte signature

    Raises:
        InvalidSeed: If the key is malformed
    """
    if len(private_key) != SEED_LENGTH:
        raise InvalidSeed("malformed private key")
    return ed25519.Ed25519PrivateKey.from_private_bytes(private_key).sign(message)


def verify(public_key: bytes, message: bytes, signature: bytes) -> bool:
    """
    Check an Ed25519 signature; malformed input yields False, never an exception

    Args:
        public_key: 32-byte verification key
        message: Signed bytes
        signature: 64-byte signature

    Returns:
        True iff the signature is valid
    """
    try:
        if len(signature) != SIGNATURE_LENGTH:
            return False
        ed25519.Ed25519PublicKey.from_public_bytes(bytes(public_key)).verify(
            bytes(signature), bytes(message)
        )
        return True
    except (InvalidSignature, ValueError, TypeError):
        return False


def digest(data: bytes) -> Hash32:
    """SHA-256 of data"""
    return Hash32(hashlib.sha256(data).digest())


@dataclass(frozen=True)
class CanonicalRecord:
    """Ordered (tag, value) pairs; tags strictly increasing"""
    fields: Tuple[Tuple[int, bytes], ...] = ()

    @classmethod
    def of(cls, pairs: Iterable[Tuple[int, bytes]]) -> "CanonicalRecord":
        return cls(tuple((int(tag), bytes(value)) for tag, value in pairs))

    def get(self, tag: int) -> bytes:
        for field_tag, value in self.fields:
            if field_tag == tag:
                return value
        raise KeyError(tag)


RecordLike = Union[CanonicalRecord, Sequence[Tuple[int, bytes]]]


def canonical_encode(record: RecordLike) -> bytes:
    """
    Encode a record as tag(2) | length(4) | value per field

    Args:
        record: CanonicalRecord or sequence of (tag, value) pairs

    Returns:
        Encoded bytes (empty for an empty record)

    Raises:
        NonCanonicalOrder: If tags are not strictly increasing
    """
    pairs = record.fields if isinstance(record, CanonicalRecord) else record
    out = bytearray()
    previous = -1

    for tag, value in pairs:
        if not 0 <= tag <= _MAX_TAG:
            raise NonCanonicalOrder(f"tag {tag} out of range")
        if tag <= previous:
            raise NonCanonicalOrder(f"tag {tag} after {previous}")
        if len(value) > _MAX_VALUE:
            raise NonCanonicalOrder(f"value for tag {tag} too long")
        out += _HEADER.pack(tag, len(value))
        out += value
        previous = tag

    return bytes(out)


def canonical_decode(data: bytes) -> CanonicalRecord:
    """
    Decode bytes produced by canonical_encode

    Raises:
        MalformedRecord: On truncation
        NonCanonicalOrder: If decoded tags are not strictly increasing
    """
    pairs: List[Tuple[int, bytes]] = []
    offset = 0
    previous = -1

    while offset < len(data):
        if offset + _HEADER.size > len(data):
            raise MalformedRecord(f"truncated header at offset {offset}")
        tag, length = _HEADER.unpack_from(data, offset)
        offset += _HEADER.size
        if offset + length > len(data):
            raise MalformedRecord(f"truncated value for tag {tag}")
        if tag <= previous:
            raise NonCanonicalOrder(f"tag {tag} after {previous}")
        pairs.append((tag, bytes(data[offset:offset + length])))
        offset += length
        previous = tag

    return CanonicalRecord(tuple(pairs))


# Value encoders used by every to-be-signed structure

def u64(value: int) -> bytes:
    return int(value).to_bytes(8, 'big', signed=False)


def text(value: str) -> bytes:
    return value.encode('utf-8')


def flag(value: bool) -> bytes:
    return b'\x01' if value else b'\x00'


def encode_sequence(items: Iterable[bytes]) -> bytes:
    """Encode an ordered list of byte strings as a nested record (tags 1..n)"""
    return canonical_encode([(index, item) for index, item in enumerate(items, 1)])


def encode_mapping(mapping: Mapping[str, str]) -> bytes:
    """Encode a str->str map, sorted by key, as a nested record"""
    return encode_sequence(
        canonical_encode([(1, text(key)), (2, text(str(mapping[key])))])
        for key in sorted(mapping)
    )


def encode_text_set(values: Iterable[str]) -> bytes:
    """Encode a set of strings in sorted order"""
    return encode_sequence(text(value) for value in sorted(set(values)))


def decode_sequence(data: bytes) -> List[bytes]:
    return [value for _, value in canonical_decode(data).fields]
