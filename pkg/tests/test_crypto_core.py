"""
Signature, digest and canonical encoding tests
File: tests/test_crypto_core.py
"""
import pytest
from nacl.signing import SigningKey

from pki.crypto_core import (
    CanonicalRecord,
    canonical_decode,
    canonical_encode,
    digest,
    encode_mapping,
    generate_keypair,
    sign,
    verify,
)
from utils.errors import InvalidSeed, MalformedRecord, NonCanonicalOrder

# RFC 8032 section 7.1, TEST 1 and TEST 2
VECTORS = [
    (
        "9d61b19deffd5a60ba844af492ec2cc44449c5697b326919703bac031cae7f60",
        "d75a980182b10ab7d54bfed3c964073a0ee172f3daa62325af021a68f707511a",
        "",
        "e5564300c360ac729086e2cc806e828a84877f1eb8e5d974d873e065"
        "224901555fb8821590a33bacc61e39701cf9b46bd25bf5f0595bbe24655141438e7a100b",
    ),
    (
        "4ccd089b28ff96da9db6c346ec114e0f5b8a319f35aba624da8cf6ed4fb8a6fb",
        "3d4017c3e843895a92b70aa74d1b7ebc9c982ccf2ec4968cc0cd55f12af4660c",
        "72",
        "92a009a9f0d4cab8720e820b5f642540a2b27b5416503f8fb3762223ebdb69da"
        "085ac1e43e15996e458f3613d0f11d8c387b2eaeb4302aeeb00d291612bb0c00",
    ),
]


@pytest.mark.parametrize("secret,public,message,signature", VECTORS)
def test_rfc8032_vectors(secret, public, message, signature):
    keypair = generate_keypair(bytes.fromhex(secret))
    assert keypair.public_key.hex() == public
    produced = sign(keypair.private_key, bytes.fromhex(message))
    assert produced.hex() == signature
    assert verify(keypair.public_key, bytes.fromhex(message), produced)


@pytest.mark.parametrize("secret,public,message,signature", VECTORS)
def test_matches_libsodium(secret, public, message, signature):
    seed = bytes.fromhex(secret)
    reference = SigningKey(seed)
    assert bytes(reference.verify_key) == generate_keypair(seed).public_key
    assert reference.sign(bytes.fromhex(message)).signature == sign(seed, bytes.fromhex(message))


def test_verify_rejects_tampering():
    keypair = generate_keypair(bytes(range(32)))
    signature = sign(keypair.private_key, b"transfer 10")
    assert not verify(keypair.public_key, b"transfer 11", signature)
    flipped = bytes([signature[0] ^ 1]) + signature[1:]
    assert not verify(keypair.public_key, b"transfer 10", flipped)


def test_verify_never_raises_on_garbage():
    assert not verify(b"short", b"m", bytes(64))
    assert not verify(bytes(32), b"m", b"too short")


def test_keypair_is_deterministic():
    assert generate_keypair(bytes(32)) == generate_keypair(bytes(32))
    assert generate_keypair(bytes(32)) != generate_keypair(bytes(31) + b"\x01")


@pytest.mark.parametrize("seed", [b"", bytes(31), bytes(33), "x" * 32])
def test_invalid_seed(seed):
    with pytest.raises(InvalidSeed):
        generate_keypair(seed)


def test_digest_of_empty_input():
    assert digest(b"").hex() == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"


def test_canonical_encoding_layout():
    encoded = canonical_encode([(1, b"ab"), (7, b"")])
    assert encoded == bytes.fromhex("0001" "00000002" "6162" "0007" "00000000")
    assert canonical_decode(encoded) == CanonicalRecord(((1, b"ab"), (7, b"")))
    assert canonical_encode([]) == b""


@pytest.mark.parametrize("pairs", [[(2, b"a"), (1, b"b")], [(1, b"a"), (1, b"b")], [(70000, b"")]])
def test_encode_rejects_non_canonical_order(pairs):
    with pytest.raises(NonCanonicalOrder):
        canonical_encode(pairs)


def test_decode_rejects_truncation_and_disorder():
    encoded = canonical_encode([(1, b"abcd")])
    with pytest.raises(MalformedRecord):
        canonical_decode(encoded[:-1])
    with pytest.raises(MalformedRecord):
        canonical_decode(encoded[:3])
    swapped = canonical_encode([(2, b"x")]) + canonical_encode([(1, b"y")])
    with pytest.raises(NonCanonicalOrder):
        canonical_decode(swapped)


def test_mapping_encoding_ignores_insertion_order():
    assert encode_mapping({"b": "2", "a": "1"}) == encode_mapping({"a": "1", "b": "2"})
