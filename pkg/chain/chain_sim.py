"""
Append-only, hash-chained ledger with delayed confirmation
File: chain/chain_sim.py

Confirmed transactions are never edited or removed; there is deliberately no
API that would do so. Balances are not tracked, amounts are carried verbatim.
"""
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Dict, List, Optional, Set, Tuple, Union

from pki.crypto_core import (
    Hash32,
    canonical_encode,
    digest,
    encode_sequence,
    sign,
    text,
    u64,
    verify,
)
from utils.logging_utils import get_logger

GENESIS_HASH = bytes(32)
DEFAULT_CONFIRMATION_DELAY = 3


@dataclass(frozen=True)
class ChainTransaction:
    from_public_key: bytes
    to_public_key: bytes
    amount: int
    asset_type: str
    nonce: bytes
    submitter_signature: bytes = b""

    def body_bytes(self) -> bytes:
        """Canonical transaction bytes; the tx id and the signature cover these"""
        return canonical_encode([
            (1, self.from_public_key),
            (2, self.to_public_key),
            (3, u64(self.amount)),
            (4, text(self.asset_type)),
            (5, self.nonce),
        ])

    @property
    def tx_id(self) -> Hash32:
        return digest(self.body_bytes())

    def signed(self, private_key: bytes) -> "ChainTransaction":
        return replace(self, submitter_signature=sign(private_key, self.body_bytes()))

    def signature_valid(self) -> bool:
        return verify(self.from_public_key, self.body_bytes(), self.submitter_signature)

    def to_bytes(self) -> bytes:
        return canonical_encode([(1, self.body_bytes()), (2, self.submitter_signature)])


@dataclass(frozen=True)
class Block:
    height: int
    tick: int
    transactions: Tuple[ChainTransaction, ...]
    previous_hash: bytes
    block_hash: bytes

    @staticmethod
    def compute_hash(height: int, tick: int, transactions: Tuple[ChainTransaction, ...], previous_hash: bytes) -> bytes:
        return digest(canonical_encode([
            (1, u64(height)),
            (2, u64(tick)),
            (3, encode_sequence(tx.to_bytes() for tx in transactions)),
            (4, previous_hash),
        ]))


class RejectReason(str, Enum):
    BAD_SIGNATURE = "BadSignature"
    DUPLICATE = "Duplicate"


@dataclass(frozen=True)
class Rejected:
    reason: RejectReason


@dataclass(frozen=True)
class ConfirmationEvent:
    tx: ChainTransaction
    block_height: int
    tick: int

    @property
    def tx_id(self) -> Hash32:
        return self.tx.tx_id


SubmitResult = Union[Hash32, Rejected]
Subscriber = Callable[[ConfirmationEvent], None]


class Ledger:
    """Single simulated chain; one tick processed at a time"""

    def __init__(self, confirmation_delay: int = DEFAULT_CONFIRMATION_DELAY, chain_id: str = "simchain"):
        self.confirmation_delay = confirmation_delay
        self.chain_id = chain_id
        self._blocks: List[Block] = []
        self._pending: List[Tuple[int, ChainTransaction]] = []
        self._seen: Set[bytes] = set()
        self._confirmed: Dict[bytes, Tuple[int, int]] = {}
        self._subscribers: List[Subscriber] = []
        self._logger = get_logger("chain", chain=chain_id)

    @property
    def blocks(self) -> Tuple[Block, ...]:
        return tuple(self._blocks)

    @property
    def pending_count(self) -> int:
        return len(self._pending)

    def subscribe(self, callback: Subscriber):
        self._subscribers.append(callback)

    def submit_transaction(self, tx: ChainTransaction, now: int) -> SubmitResult:
        """
        Queue a signed transaction for confirmation

        Args:
            tx: Signed transaction
            now: Submission tick

        Returns:
            tx_id, or Rejected(BadSignature | Duplicate)
        """
        if not tx.signature_valid():
            self._logger.info("transaction rejected", reason="BadSignature")
            return Rejected(RejectReason.BAD_SIGNATURE)
        tx_id = tx.tx_id
        if tx_id in self._seen:
            self._logger.info("transaction rejected", reason="Duplicate", tx=tx_id.hex()[:12])
            return Rejected(RejectReason.DUPLICATE)

        self._seen.add(tx_id)
        self._pending.append((now, tx))
        return tx_id

    def tick(self, now: int) -> List[ConfirmationEvent]:
        """
        Seal every pending transaction at least confirmation_delay ticks old

        Sealed transactions keep their submission order. No block is produced
        when nothing is due. Subscribers are notified in block order.
        """
        due = [tx for submitted, tx in self._pending if now - submitted >= self.confirmation_delay]
        if not due:
            return []
        self._pending = [(s, tx) for s, tx in self._pending if now - s < self.confirmation_delay]

        height = len(self._blocks)
        previous = self._blocks[-1].block_hash if self._blocks else GENESIS_HASH
        transactions = tuple(due)
        block = Block(
            height=height,
            tick=now,
            transactions=transactions,
            previous_hash=previous,
            block_hash=Block.compute_hash(height, now, transactions, previous),
        )
        self._blocks.append(block)

        events = []
        for tx in transactions:
            self._confirmed[tx.tx_id] = (height, now)
            events.append(ConfirmationEvent(tx=tx, block_height=height, tick=now))

        for event in events:
            for callback in self._subscribers:
                callback(event)
        return events

    def verify_chain(self) -> bool:
        """Recompute the hash chain end to end"""
        previous = GENESIS_HASH
        for height, block in enumerate(self._blocks):
            if block.height != height or block.previous_hash != previous:
                return False
            if Block.compute_hash(block.height, block.tick, block.transactions, previous) != block.block_hash:
                return False
            previous = block.block_hash
        return True

    def find(self, tx_id: bytes) -> Optional[Tuple[ChainTransaction, int]]:
        """Confirmed transaction and its confirmation tick, if any"""
        located = self._confirmed.get(bytes(tx_id))
        if located is None:
            return None
        height, tick = located
        for tx in self._blocks[height].transactions:
            if tx.tx_id == bytes(tx_id):
                return tx, tick
        return None

    def is_confirmed(self, tx_id: bytes) -> bool:
        return bytes(tx_id) in self._confirmed

    def confirmed_transactions(self) -> List[Tuple[ChainTransaction, int]]:
        return [(tx, block.tick) for block in self._blocks for tx in block.transactions]

    def export_lines(self) -> List[str]:
        """tx_id,from,to,amount,asset,tick per confirmed transaction"""
        return [
            f"{tx.tx_id.hex()},{tx.from_public_key.hex()},{tx.to_public_key.hex()},"
            f"{tx.amount},{tx.asset_type},{tick}"
            for tx, tick in self.confirmed_transactions()
        ]
