"""
CA actor: answers lookups and status requests, pushes CRLs
File: simulation/ca_node.py
"""
from typing import Iterable, List, Optional, Union

from pki.certificate_authority import CertificateAuthority
from pki.certificates import Crl, DeltaCrl, RevocationEntry, RevocationReason
from simulation.actor import BaseActor
from simulation.event_log import EventLog
from simulation.message_bus import Envelope, MessageBus
from vasps.messages import CertLookup, NotFound


class CaNode(BaseActor):
    """
    Puts a CertificateAuthority on the bus

    Args:
        authority: The CA's state and operations
        bus: Message bus
        event_log: Shared evidence log
        crl_period: Ticks between full CRL pushes
        subscribers: VASP ids receiving CRLs
    """

    component = "ca"

    def __init__(
        self,
        authority: CertificateAuthority,
        bus: MessageBus,
        event_log: EventLog,
        crl_period: int,
        subscribers: Iterable[str] = (),
    ):
        super().__init__(authority.ca_id, bus, event_log)
        self.authority = authority
        self.crl_period = crl_period
        self.subscribers: List[str] = sorted(subscribers)

    def start(self):
        self.every(self.crl_period, self.push_full_crl)

    def _push(self, item: Union[Crl, DeltaCrl]):
        for vasp_id in self.subscribers:
            self.send(vasp_id, "crl", item)

    def push_full_crl(self) -> Crl:
        crl = self.authority.generate_crl(self.now)
        self._push(crl)
        self.record("crl_published", number=crl.crl_number, entries=len(crl.entries))
        return crl

    def revoke(self, serial: str, reason: RevocationReason = RevocationReason.UNSPECIFIED) -> RevocationEntry:
        """
        Revoke and push the change right away

        The push is a delta against the last full CRL, or a full CRL if none
        was generated yet.

        Raises:
            UnknownSerial, AlreadyRevoked: Propagated from the CA
        """
        entry = self.authority.revoke(serial, reason, self.now)
        self.record("certificate_revoked", serial=serial, reason=entry.reason)
        base = self.authority.last_full_crl
        if base is None:
            self.push_full_crl()
        else:
            delta = self.authority.generate_delta_crl(base.crl_number, self.now)
            self._push(delta)
            self.record("delta_crl_published", number=delta.crl_number, base=base.crl_number,
                        entries=len(delta.entries))
        return entry

    def _lookup(self, request: CertLookup):
        if request.public_key is not None:
            result = self.authority.find_certificate_by_pubkey(request.public_key, self.now)
        elif request.key_hash is not None:
            result = self.authority.find_certificate_by_key_hash(request.key_hash, self.now)
        else:
            result = None
        return result if result is not None else NotFound("unknown-key", (self.actor_id,))

    def _latest_full(self) -> Crl:
        latest: Optional[Crl] = self.authority.last_full_crl
        return latest if latest is not None else self.authority.generate_crl(self.now)

    def handle_message(self, envelope: Envelope):
        if envelope.kind == "cert_lookup":
            self.reply(envelope, self._lookup(envelope.payload))
        elif envelope.kind == "status_request":
            self.reply(envelope, self.authority.check_status(envelope.payload, self.now))
        elif envelope.kind == "crl_pull":
            self.send(envelope.sender, "crl", self._latest_full())
        else:
            self._logger.debug("unhandled message", kind=envelope.kind, sender=envelope.sender)
        return None
