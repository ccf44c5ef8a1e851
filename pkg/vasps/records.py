"""
Travel-rule records and their lifecycle
File: vasps/records.py
"""
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterator, List, Optional

from pki.crypto_core import canonical_encode, flag, text, u64
from utils.errors import InvalidTransition
from vasps.messages import TransferAck, TransferNotice


class Role(str, Enum):
    ORIGINATOR_SIDE = "OriginatorSide"
    BENEFICIARY_SIDE = "BeneficiarySide"


class RecordStatus(str, Enum):
    PENDING_ACK = "PendingAck"
    PENDING_CHAIN = "PendingChain"
    CONFIRMED = "Confirmed"
    FAILED = "Failed"

    @property
    def terminal(self) -> bool:
        return self in (RecordStatus.CONFIRMED, RecordStatus.FAILED)


_ALLOWED = {
    RecordStatus.PENDING_ACK: {RecordStatus.PENDING_CHAIN, RecordStatus.FAILED},
    RecordStatus.PENDING_CHAIN: {RecordStatus.CONFIRMED, RecordStatus.FAILED},
    RecordStatus.CONFIRMED: set(),
    RecordStatus.FAILED: set(),
}


@dataclass
class TravelRuleRecord:
    record_id: str
    role: Role
    notice: TransferNotice
    ack: Optional[TransferAck]
    chain_tx_id: Optional[bytes]
    status: RecordStatus
    created_at: int
    updated_at: int
    failure_reason: Optional[str] = None

    @property
    def notice_id(self) -> bytes:
        return self.notice.notice_id

    @property
    def binding(self) -> bytes:
        return bytes(self.notice.intended_chain_tx_binding)

    def transition(self, status: RecordStatus, now: int, reason: Optional[str] = None):
        """
        Move along PendingAck -> PendingChain -> Confirmed, or to Failed

        Raises:
            InvalidTransition: For any other move
        """
        if status not in _ALLOWED[self.status]:
            raise InvalidTransition(f"{self.record_id}: {self.status.value} -> {status.value}")
        self.status = status
        self.updated_at = now
        if status is RecordStatus.FAILED:
            self.failure_reason = reason or "unspecified"

    def encode(self) -> bytes:
        return canonical_encode([
            (1, text(self.record_id)),
            (2, text(self.role.value)),
            (3, self.notice.to_bytes()),
            (4, self.ack.to_bytes() if self.ack else b""),
            (5, bytes(self.chain_tx_id or b"")),
            (6, text(self.status.value)),
            (7, u64(self.created_at)),
            (8, u64(self.updated_at)),
            (9, flag(self.failure_reason is not None)),
            (10, text(self.failure_reason or "")),
        ])

    def status_label(self) -> str:
        if self.status is RecordStatus.FAILED:
            return f"Failed({self.failure_reason})"
        return self.status.value


class RecordStore:
    """Append-only record store of one VASP"""

    def __init__(self, owner_vasp_id: str):
        self.owner_vasp_id = owner_vasp_id
        self._records: Dict[str, TravelRuleRecord] = {}
        self._counter = 0

    def create(
        self,
        role: Role,
        notice: TransferNotice,
        now: int,
        ack: Optional[TransferAck] = None,
        status: RecordStatus = RecordStatus.PENDING_ACK,
    ) -> TravelRuleRecord:
        if status.terminal:
            raise InvalidTransition("records are created pending")
        self._counter += 1
        prefix = "o" if role is Role.ORIGINATOR_SIDE else "b"
        record = TravelRuleRecord(
            record_id=f"{self.owner_vasp_id}-{prefix}{self._counter:05d}",
            role=role,
            notice=notice,
            ack=ack,
            chain_tx_id=None,
            status=status,
            created_at=now,
            updated_at=now,
        )
        self._records[record.record_id] = record
        return record

    def get(self, record_id: str) -> Optional[TravelRuleRecord]:
        return self._records.get(record_id)

    def __iter__(self) -> Iterator[TravelRuleRecord]:
        return iter(self._records.values())

    def __len__(self) -> int:
        return len(self._records)

    def by_chain_tx(self, chain_tx_id: bytes) -> List[TravelRuleRecord]:
        return [r for r in self if r.chain_tx_id == bytes(chain_tx_id)]

    def by_binding(self, binding: bytes) -> List[TravelRuleRecord]:
        return [r for r in self if r.binding == bytes(binding)]
