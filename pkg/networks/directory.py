"""
Known-good key directories: versioned snapshots, deltas and member views
File: networks/directory.py
"""
from dataclasses import dataclass, replace
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple, Union

from pki.certificates import RevocationView
from pki.crypto_core import canonical_encode, encode_sequence, text, u64
from utils.errors import InvalidDelta


@dataclass(frozen=True, order=True)
class DirectoryEntry:
    certificate_serial: str
    public_key_hash: bytes
    issuer_ca_id: str

    def encode(self) -> bytes:
        return canonical_encode([
            (1, bytes.fromhex(self.certificate_serial)),
            (2, self.public_key_hash),
            (3, text(self.issuer_ca_id)),
        ])


def _encode_entries(entries: Iterable[DirectoryEntry]) -> bytes:
    return encode_sequence(e.encode() for e in sorted(entries))


@dataclass(frozen=True)
class DirectorySnapshot:
    owner_vasp_id: str
    version: int
    entries: FrozenSet[DirectoryEntry] = frozenset()
    signature: bytes = b""

    def tbs_bytes(self) -> bytes:
        return canonical_encode([
            (1, text(self.owner_vasp_id)),
            (2, u64(self.version)),
            (3, _encode_entries(self.entries)),
        ])

    def find(self, public_key_hash: bytes) -> Optional[DirectoryEntry]:
        for entry in sorted(self.entries):
            if entry.public_key_hash == bytes(public_key_hash):
                return entry
        return None

    def key_hashes(self) -> FrozenSet[bytes]:
        return frozenset(e.public_key_hash for e in self.entries)


@dataclass(frozen=True)
class DirectoryDelta:
    owner_vasp_id: str
    from_version: int
    to_version: int
    added: FrozenSet[DirectoryEntry] = frozenset()
    removed: FrozenSet[DirectoryEntry] = frozenset()
    signature: bytes = b""

    def __post_init__(self):
        if self.to_version != self.from_version + 1:
            raise InvalidDelta(f"delta {self.from_version}->{self.to_version} must advance by one")
        if frozenset(self.added) & frozenset(self.removed):
            raise InvalidDelta("entry both added and removed")

    def tbs_bytes(self) -> bytes:
        return canonical_encode([
            (1, text(self.owner_vasp_id)),
            (2, u64(self.from_version)),
            (3, u64(self.to_version)),
            (4, _encode_entries(self.added)),
            (5, _encode_entries(self.removed)),
        ])

    @property
    def is_empty(self) -> bool:
        return not self.added and not self.removed


@dataclass(frozen=True)
class ResyncRequired:
    owner_vasp_id: str
    have_version: int
    delta_from_version: int


def diff(old: DirectorySnapshot, new: DirectorySnapshot) -> DirectoryDelta:
    """Delta taking old to new (versions must be consecutive)"""
    return DirectoryDelta(
        owner_vasp_id=new.owner_vasp_id,
        from_version=old.version,
        to_version=new.version,
        added=frozenset(new.entries - old.entries),
        removed=frozenset(old.entries - new.entries),
    )


def apply_delta(snapshot: DirectorySnapshot, delta: DirectoryDelta) -> Union[DirectorySnapshot, ResyncRequired]:
    """
    Apply a delta to the snapshot it was cut from

    Returns:
        The next snapshot (unsigned), or ResyncRequired on a version gap
    """
    if delta.owner_vasp_id != snapshot.owner_vasp_id or delta.from_version != snapshot.version:
        return ResyncRequired(snapshot.owner_vasp_id, snapshot.version, delta.from_version)
    return DirectorySnapshot(
        owner_vasp_id=snapshot.owner_vasp_id,
        version=delta.to_version,
        entries=frozenset((snapshot.entries - delta.removed) | delta.added),
    )


class DirectoryPublisher:
    """One VASP's own publication series; version 0 is the implicit empty start"""

    def __init__(self, owner_vasp_id: str):
        self.owner_vasp_id = owner_vasp_id
        self.history: Dict[int, DirectorySnapshot] = {0: DirectorySnapshot(owner_vasp_id, 0)}

    @property
    def latest(self) -> DirectorySnapshot:
        return self.history[max(self.history)]

    def publish(self, entries: Iterable[DirectoryEntry]) -> Tuple[DirectorySnapshot, DirectoryDelta]:
        """
        Publish the next version; an unchanged entry set still bumps the version

        Returns:
            (new snapshot, delta from the previous one), both unsigned
        """
        previous = self.latest
        snapshot = DirectorySnapshot(self.owner_vasp_id, previous.version + 1, frozenset(entries))
        self.history[snapshot.version] = snapshot
        return snapshot, diff(previous, snapshot)


class DirectoryView:
    """A member's view of every publisher it hears from"""

    def __init__(self):
        self._snapshots: Dict[str, DirectorySnapshot] = {}

    def snapshot_of(self, owner_vasp_id: str) -> DirectorySnapshot:
        return self._snapshots.get(owner_vasp_id, DirectorySnapshot(owner_vasp_id, 0))

    def version_of(self, owner_vasp_id: str) -> int:
        return self.snapshot_of(owner_vasp_id).version

    @property
    def publishers(self) -> List[str]:
        return sorted(self._snapshots)

    def apply_delta(self, delta: DirectoryDelta) -> Union[DirectorySnapshot, ResyncRequired]:
        result = apply_delta(self.snapshot_of(delta.owner_vasp_id), delta)
        if isinstance(result, DirectorySnapshot):
            self._snapshots[delta.owner_vasp_id] = result
        return result

    def install_snapshot(self, snapshot: DirectorySnapshot) -> bool:
        """Full-snapshot pull; only newer versions replace the view"""
        current = self._snapshots.get(snapshot.owner_vasp_id)
        if current is not None and snapshot.version <= current.version:
            return False
        self._snapshots[snapshot.owner_vasp_id] = replace(snapshot, signature=b"")
        return True

    def find(self, public_key_hash: bytes, owners: Optional[Iterable[str]] = None) -> List[Tuple[str, DirectoryEntry]]:
        """Publishers (ascending id) whose snapshot lists the key hash"""
        allowed = set(owners) if owners is not None else None
        hits = []
        for owner in self.publishers:
            if allowed is not None and owner not in allowed:
                continue
            entry = self._snapshots[owner].find(public_key_hash)
            if entry is not None:
                hits.append((owner, entry))
        return hits

    def key_hashes(self, owners: Optional[Iterable[str]] = None) -> Set[bytes]:
        selected = self.publishers if owners is None else [o for o in owners if o in self._snapshots]
        hashes: Set[bytes] = set()
        for owner in selected:
            hashes |= self._snapshots[owner].key_hashes()
        return hashes

    def drop_entry(self, owner_vasp_id: str, serial: str) -> bool:
        """Mark an entry stale (its owner reported it invalid); version is kept"""
        snapshot = self._snapshots.get(owner_vasp_id)
        if snapshot is None:
            return False
        kept = frozenset(e for e in snapshot.entries if e.certificate_serial != serial)
        if kept == snapshot.entries:
            return False
        self._snapshots[owner_vasp_id] = replace(snapshot, entries=kept)
        return True

    def purge_revoked(self, revocations: RevocationView) -> int:
        """Remove every entry whose serial the holder knows to be revoked"""
        removed = 0
        for owner in self.publishers:
            snapshot = self._snapshots[owner]
            kept = frozenset(
                e for e in snapshot.entries
                if not revocations.is_revoked(e.issuer_ca_id, e.certificate_serial)
            )
            if kept != snapshot.entries:
                removed += len(snapshot.entries) - len(kept)
                self._snapshots[owner] = replace(snapshot, entries=kept)
        return removed
