"""
Ledger tests
File: tests/test_chain_sim.py
"""
from dataclasses import replace

import pytest

from chain.chain_sim import GENESIS_HASH, ChainTransaction, Ledger, Rejected, RejectReason
from conftest import make_keypair


@pytest.fixture
def sender():
    return make_keypair("chain", "sender")


@pytest.fixture
def recipient():
    return make_keypair("chain", "recipient")


def _tx(sender, recipient, amount=10, nonce=b"\x00" * 16):
    return ChainTransaction(sender.public_key, recipient.public_key, amount, "SIM", nonce).signed(sender.private_key)


def test_tx_id_excludes_signature(sender, recipient):
    tx = _tx(sender, recipient)
    assert tx.signature_valid()
    assert replace(tx, submitter_signature=b"").tx_id == tx.tx_id


def test_rejects_bad_signature(sender, recipient):
    ledger = Ledger()
    forged = replace(_tx(sender, recipient), amount=11)
    assert ledger.submit_transaction(forged, 0) == Rejected(RejectReason.BAD_SIGNATURE)
    assert ledger.pending_count == 0


def test_rejects_duplicate(sender, recipient):
    ledger = Ledger()
    tx = _tx(sender, recipient)
    assert ledger.submit_transaction(tx, 0) == tx.tx_id
    assert ledger.submit_transaction(tx, 1) == Rejected(RejectReason.DUPLICATE)


def test_confirmation_after_delay(sender, recipient):
    ledger = Ledger(confirmation_delay=3)
    seen = []
    ledger.subscribe(seen.append)
    first = _tx(sender, recipient, nonce=b"\x01" * 16)
    second = _tx(sender, recipient, nonce=b"\x02" * 16)
    ledger.submit_transaction(first, 0)
    ledger.submit_transaction(second, 1)

    assert ledger.tick(2) == []
    assert not ledger.blocks

    events = ledger.tick(3)
    assert [e.tx_id for e in events] == [first.tx_id]
    assert ledger.is_confirmed(first.tx_id)
    assert not ledger.is_confirmed(second.tx_id)

    ledger.tick(4)
    assert [e.tx_id for e in seen] == [first.tx_id, second.tx_id]
    assert ledger.find(second.tx_id) == (second, 4)
    assert ledger.find(b"\x00" * 32) is None
    assert [b.height for b in ledger.blocks] == [0, 1]
    assert ledger.blocks[0].previous_hash == GENESIS_HASH
    assert ledger.blocks[1].previous_hash == ledger.blocks[0].block_hash


def test_submission_order_kept_within_block(sender, recipient):
    ledger = Ledger(confirmation_delay=1)
    txs = [_tx(sender, recipient, nonce=bytes([i]) * 16) for i in range(5)]
    for tx in txs:
        ledger.submit_transaction(tx, 0)
    ledger.tick(1)
    assert list(ledger.blocks[0].transactions) == txs


def test_verify_chain_detects_tampering(sender, recipient):
    ledger = Ledger(confirmation_delay=1)
    for i in range(3):
        ledger.submit_transaction(_tx(sender, recipient, nonce=bytes([i]) * 16), i)
        ledger.tick(i + 1)
    assert ledger.verify_chain()

    block = ledger._blocks[0]
    altered = replace(block.transactions[0], amount=999_999)
    ledger._blocks[0] = replace(block, transactions=(altered,) + block.transactions[1:])
    assert not ledger.verify_chain()


def test_export_lines(sender, recipient):
    ledger = Ledger(confirmation_delay=0)
    tx = _tx(sender, recipient, amount=42)
    ledger.submit_transaction(tx, 5)
    ledger.tick(5)
    assert ledger.export_lines() == [
        f"{tx.tx_id.hex()},{sender.public_key.hex()},{recipient.public_key.hex()},42,SIM,5"
    ]
