"""
VASP node: accounts, beneficiary resolution, the transfer pipeline, directory gossip and routing
File: vasps/vasp_node.py
"""
import random
from dataclasses import dataclass, replace
from typing import Dict, Generator, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from chain.chain_sim import ChainTransaction, ConfirmationEvent, Ledger, Rejected
from networks.directory import (
    DirectoryDelta,
    DirectoryEntry,
    DirectoryPublisher,
    DirectorySnapshot,
    DirectoryView,
    ResyncRequired,
)
from networks.operating_rules import OperatingRules
from networks.path_vector import (
    Accept,
    PeeringLink,
    ReachabilityAdvertisement,
    Route,
    RouteTable,
    install_relayed,
    process_advertisement,
)
from networks.trust_network import advertise_reachability, sign_advertisement
from pki.assertion_service import TRAVEL_RULE_ATTRIBUTES, AssertionService, AttributeAssertion, verify_assertion
from pki.certificate_authority import CertificateAuthority, LookupResult, Validity
from pki.certificates import (
    CUSTOMER_PROFILE,
    Certificate,
    CertificateClass,
    CertificateProfile,
    Crl,
    DeltaCrl,
    RevocationView,
    ValidationResult,
    validate_certificate,
)
from pki.crypto_core import KeyPair, digest, sign, verify
from simulation.actor import BaseActor
from simulation.event_log import EventLog
from simulation.message_bus import Envelope, MessageBus
from utils.errors import (
    EmptyDisclosure,
    KeyUnavailable,
    MixedDestination,
    NoCustomerKey,
    SubjectCertInvalid,
    TravelRuleError,
)
from utils.id_utils import derive_rng, derive_seed
from vasps.accounts import Account, CustodyModel, SuspectList
from vasps.compliance import (
    AuditReport,
    EvidenceBundle,
    ReconciliationReport,
    audit_travel_rule,
    reconcile,
)
from vasps.custody import (
    BaseCustodyHandler,
    CommingledCustodyHandler,
    CustomerWallet,
    KeyCustodyHandler,
    MediatedCustodyHandler,
)
from vasps.messages import (
    AccountInquiry,
    AckDecision,
    BatchEntry,
    BindingMismatchReport,
    BeneficiaryRef,
    Broadcast,
    CertLookup,
    CrossNetworkQuery,
    Denied,
    DenyReason,
    NotFound,
    QueryResponse,
    QueryResult,
    QueryStatus,
    RejectReason,
    ResolutionResult,
    ResolvedBeneficiary,
    Target,
    TransferAck,
    TransferNotice,
    TransferRequest,
    Unresolved,
)
from vasps.records import RecordStatus, RecordStore, Role, TravelRuleRecord

DEFAULT_CERT_LIFETIME = 1_000_000
DEFAULT_ASSET = "VA"


@dataclass
class NetworkContext:
    """What a node knows about one of its networks"""
    network_id: str
    rules: OperatingRules
    members: Tuple[str, ...] = ()
    gateways: Tuple[str, ...] = ()


@dataclass(frozen=True)
class PreparedTransfer:
    notice: TransferNotice
    transaction: ChainTransaction
    account: Account


class VaspNode(BaseActor):
    """
    One VASP as a simulated actor

    Customer-facing operations (open_account, enroll, initiate_transfer, ...)
    are called by the harness; everything between VASPs travels over the bus.
    """

    component = "vasp"

    def __init__(
        self,
        vasp_id: str,
        bus: MessageBus,
        event_log: EventLog,
        keypair: KeyPair,
        ledger: Ledger,
        affiliated_ca: CertificateAuthority,
        trust_anchors: Iterable[Certificate],
        master_seed: int,
        supported_assets: Optional[Iterable[str]] = None,
    ):
        """
        Initialize node

        Args:
            vasp_id: Node id (also its certificate subject)
            bus: Message bus
            event_log: Shared evidence log
            keypair: VASP signing key, certified as this VASP's certificate
            ledger: Simulated chain
            affiliated_ca: CA enrolling this VASP's customers (and reached as an actor for lookups)
            trust_anchors: Root certificates of every CA
            master_seed: Scenario seed, for key and id sub-streams
            supported_assets: Asset types accepted inbound (None accepts any)
        """
        super().__init__(vasp_id, bus, event_log)
        self.keypair = keypair
        self.ledger = ledger
        self.affiliated_ca = affiliated_ca
        self.trust_anchors: List[Certificate] = list(trust_anchors)
        self.anchor_map: Dict[str, Certificate] = {a.subject_id: a for a in self.trust_anchors}
        self.master_seed = master_seed
        self.supported_assets = frozenset(supported_assets) if supported_assets else None
        self.certificate: Optional[Certificate] = None
        self.customer_profile: CertificateProfile = CUSTOMER_PROFILE

        self.accounts: Dict[str, Account] = {}
        self.wallets: Dict[bytes, CustomerWallet] = {}
        self.custody: Dict[CustodyModel, BaseCustodyHandler] = {
            CustodyModel.MEDIATED: MediatedCustodyHandler(self),
            CustodyModel.KEY_CUSTODY: KeyCustodyHandler(self),
            CustodyModel.COMMINGLED: CommingledCustodyHandler(self),
        }
        self.suspects = SuspectList()
        self.records = RecordStore(vasp_id)
        self.revocations = RevocationView()
        self.publisher = DirectoryPublisher(vasp_id)
        self.directory = DirectoryView()
        self.routes = RouteTable()
        self.resolution_cache: Dict[bytes, ResolvedBeneficiary] = {}
        self.returns: Dict[bytes, bytes] = {}

        self.networks: Dict[str, NetworkContext] = {}
        self.links: List[PeeringLink] = []
        self.peer_certificates: Dict[str, Certificate] = {}

        self._rng: random.Random = derive_rng(master_seed, "vasp", vasp_id)
        self.assertions = AssertionService(vasp_id, keypair, derive_rng(master_seed, "assertions", vasp_id),
                                           self.validate)
        self._signed_snapshot: DirectorySnapshot = self.publisher.latest
        self._account_counter = 0

        # fault fixture: the next execution broadcasts a transaction other than the announced one
        self.tamper_next_execution = False

        self.resolution_attempts = 0
        self.resolution_successes = 0
        self.resolution_hops = 0
        self.advertisements_accepted = 0
        self.advertisements_dropped = 0

        ledger.subscribe(self.on_chain_confirmation)

    # Setup

    def key_seed(self, *labels: str) -> bytes:
        return derive_seed(self.master_seed, "vasp", self.actor_id, *labels)

    def configure_network(self, network_id: str, rules: OperatingRules, members: Sequence[str], gateways: Sequence[str]):
        self.networks[network_id] = NetworkContext(network_id, rules, tuple(sorted(members)), tuple(sorted(gateways)))

    def add_link(self, link: PeeringLink):
        if not link.involves(self.actor_id):
            raise ValueError(f"{link.link_id} does not involve {self.actor_id}")
        self.links.append(link)

    @property
    def primary_network(self) -> Optional[str]:
        return min(self.networks) if self.networks else None

    @property
    def rules(self) -> OperatingRules:
        primary = self.primary_network
        return self.networks[primary].rules if primary else OperatingRules()

    @property
    def is_gateway(self) -> bool:
        return bool(self.links)

    @property
    def rpc_timeout(self) -> int:
        return 2 * self.bus.max_latency + 1

    @property
    def xnet_budget(self) -> int:
        return self.rpc_timeout * (len(self.networks) + len(self.links) + 4)

    def network_peers(self) -> List[str]:
        peers: Set[str] = set()
        for context in self.networks.values():
            peers.update(context.members)
        peers.discard(self.actor_id)
        return sorted(peers)

    def members_of(self, network_id: str) -> Tuple[str, ...]:
        context = self.networks.get(network_id)
        return context.members if context else ()

    def gateway_candidates(self) -> List[str]:
        gateways: Set[str] = set()
        for context in self.networks.values():
            gateways.update(context.gateways)
        return sorted(gateways)

    def start(self):
        rules = self.rules
        self.every(rules.directory_sync_period, self._sync_round)
        self.every(rules.crl_exchange_period, self.exchange_revocations)

    def _sync_round(self):
        self.publish_directory()
        if self.is_gateway:
            self.advertise_all()

    # Validation and screening

    def validate(self, cert: Certificate, chain_id: Optional[str] = None) -> ValidationResult:
        return validate_certificate(
            cert,
            self.trust_anchors,
            self.now,
            revocations=self.revocations,
            chain_id=chain_id,
            minimum_class=self.rules.minimum_certificate_class,
        )

    def screen_suspect(self, party_refs: Iterable[str]) -> bool:
        """True iff no reference is on this VASP's suspect list"""
        return not self.suspects.intersects(party_refs)

    # Accounts

    def handler_for(self, account: Account) -> BaseCustodyHandler:
        return self.custody[account.custody_model]

    def settlement_key(self, account: Account) -> bytes:
        return self.handler_for(account).settlement_public_key(account)

    def open_account(
        self,
        subject_id: str,
        subject_attributes: Mapping[str, str],
        custody_model: CustodyModel,
        customer_public_key: Optional[bytes] = None,
        account_id: Optional[str] = None,
    ) -> Account:
        """
        Open a customer account under a custody model

        Raises:
            ModelKeyMismatch: Supplied key contradicts the model
            ValueError: Duplicate account id
        """
        custody_model = CustodyModel(custody_model)
        if account_id is None:
            self._account_counter += 1
            account_id = f"{self.actor_id}-acct{self._account_counter:04d}"
        if account_id in self.accounts:
            raise ValueError(f"account {account_id} already exists")

        account = Account(
            account_id=account_id,
            subject_id=subject_id,
            attributes={k: str(v) for k, v in subject_attributes.items()},
            custody_model=custody_model,
        )
        self.handler_for(account).provision(account, customer_public_key, self.now)
        self.accounts[account_id] = account
        self.record("account_opened", account=account_id, custody=custody_model.value)
        return account

    def attach_wallet(self, wallet: CustomerWallet):
        self.wallets[wallet.public_key] = wallet

    def enroll_customer_certificate(
        self,
        account: Account,
        ca: Optional[CertificateAuthority] = None,
        requested_class: CertificateClass = CertificateClass.CLASS1,
        validity: Optional[Validity] = None,
    ) -> Certificate:
        """
        Register the customer at a CA and certify the account key

        Raises:
            NoCustomerKey: Commingled account
            RegistrationRejected, ClassTooLow, KeyAlreadyBound: Propagated from the CA
        """
        if account.customer_public_key is None:
            raise NoCustomerKey(f"{account.account_id}: {account.custody_model.value} accounts have no customer key")

        ca = ca or self.affiliated_ca
        now = self.now
        registered = account.registered_attributes(self.actor_id, account.customer_public_key)
        registration = ca.register_subject(account.account_id, registered, requested_class, now)
        cert = ca.issue_certificate(
            registration,
            account.customer_public_key,
            self.customer_profile,
            validity or Validity(now, now + DEFAULT_CERT_LIFETIME),
            now,
        )
        account.certificate = cert
        account.certificate_serial = cert.serial
        account.key_ownership_evidence = cert.fingerprint
        self.record("certificate_enrolled", account=account.account_id, serial=cert.serial, ca=ca.ca_id,
                    cert_class=cert.cert_class.label)
        return cert

    def _account(self, account_id: str) -> Account:
        account = self.accounts.get(account_id)
        if account is None:
            raise KeyError(f"{self.actor_id} has no account {account_id}")
        return account

    def _account_by_key_hash(self, key_hash: bytes) -> Optional[Account]:
        for account_id in sorted(self.accounts):
            account = self.accounts[account_id]
            if account.customer_public_key is not None and bytes(account.public_key_hash) == bytes(key_hash):
                return account
        return None

    def _account_for_ref(self, ref: BeneficiaryRef) -> Optional[Account]:
        if ref.account_id is not None:
            account = self.accounts.get(ref.account_id)
            if account is None or bytes(digest(self.settlement_key(account))) != bytes(ref.public_key_hash):
                return None
            return account
        return self._account_by_key_hash(ref.public_key_hash)

    def _account_refs(self, account: Account) -> List[str]:
        refs = [account.account_id]
        if account.public_key_hash is not None:
            refs.append(bytes(account.public_key_hash).hex())
        return refs

    def known_keys(self) -> Set[bytes]:
        keys = {self.keypair.public_key}
        keys.update(a.customer_public_key for a in self.accounts.values() if a.customer_public_key is not None)
        return keys

    def _disclosed_assertion(self, account: Account, subject_certificate: Certificate) -> AttributeAssertion:
        registered = account.registered_attributes(self.actor_id, self.settlement_key(account))
        requested = sorted(name for name in TRAVEL_RULE_ATTRIBUTES if name in registered)
        full = self.assertions.issue_assertion(account.account_id, registered, subject_certificate, requested, self.now)
        return self.assertions.filter_attributes(full, self.rules.required_disclosure_policy, self.now)

    # Beneficiary resolution

    def resolve_beneficiary(self, target: Target):
        """
        Locate the beneficiary certificate and home VASP (use with ``yield from``)

        Tries, in order: own accounts and cache, the named VASP for account
        targets, the affiliated CA, network directory owners, then gateways.

        Returns:
            ResolvedBeneficiary or Unresolved
        """
        self.resolution_attempts += 1
        result = yield from self._resolve(target)
        if isinstance(result, ResolvedBeneficiary):
            self.resolution_successes += 1
            self.resolution_hops += len(result.resolution_path) - 1
            if len(result.resolution_path) > 1 and not result.revoked and target.account_id is None:
                self.resolution_cache[bytes(result.public_key_hash)] = result
            self.record("beneficiary_resolved", path=result.resolution_path, networks=result.network_path,
                        home=result.home_vasp_id, revoked=result.revoked)
        else:
            self.record("beneficiary_unresolved", path=result.resolution_path, reason=result.reason)
        return result

    def _resolve(self, target: Target) -> Generator:
        here = (self.actor_id,)
        if target.account_id is not None:
            if target.vasp_id == self.actor_id:
                return self._resolve_own_account(target.account_id)
            response = yield from self.request(target.vasp_id, "account_inquiry", AccountInquiry(target.account_id),
                                               self.rpc_timeout)
            if isinstance(response, QueryResponse):
                return self._from_response(response, here + (target.vasp_id,), ())
            return Unresolved(here + (target.vasp_id,), "account-inquiry-failed")

        key_hash = bytes(target.key_hash)
        local = self._resolve_locally(key_hash)
        if local is not None:
            return local

        ca_id = self.affiliated_ca.ca_id
        lookup = yield from self.request(ca_id, "cert_lookup", CertLookup(target.public_key, key_hash), self.rpc_timeout)
        if isinstance(lookup, LookupResult) and lookup.home_vasp_certificate is not None:
            return ResolvedBeneficiary(
                certificate=lookup.certificate,
                home_vasp_id=lookup.home_vasp_certificate.subject_id,
                home_vasp_certificate=lookup.home_vasp_certificate,
                resolution_path=here + (ca_id,),
                attributes=dict(lookup.attributes),
                account_id=lookup.attributes.get("account_id"),
                revoked=lookup.revoked,
            )

        path = here
        for owner, entry in self.directory.find(key_hash, owners=self.network_peers()):
            path = path + (owner,)
            response = yield from self.request(owner, "cert_query", key_hash, self.rpc_timeout)
            if isinstance(response, QueryResponse) and bytes(response.certificate.public_key_hash) == key_hash:
                if response.status is QueryStatus.REVOKED:
                    self.directory.drop_entry(owner, entry.certificate_serial)
                return self._from_response(response, here + (owner,), ())
            self.directory.drop_entry(owner, entry.certificate_serial)
            self.record("directory_inconsistent", owner=owner, serial=entry.certificate_serial)

        for gateway in self.gateway_candidates():
            query = CrossNetworkQuery(
                public_key_hash=key_hash,
                requester_id=self.actor_id,
                hops=here,
                networks=(self.primary_network,) if self.primary_network else (),
                deadline=self.now + self.xnet_budget,
            )
            if gateway == self.actor_id:
                response = yield from self._route_query(query, None)
            else:
                response = yield from self.request(gateway, "xnet_query", query, self.xnet_budget)
            if isinstance(response, QueryResponse):
                return self._from_response(response, response.hops, response.networks)
            path = path + (gateway,)

        return Unresolved(path, "no-source-knows-key")

    def _resolve_own_account(self, account_id: str) -> ResolutionResult:
        account = self.accounts.get(account_id)
        cert = self.handler_for(account).subject_certificate(account) if account else None
        if cert is None:
            return Unresolved((self.actor_id,), "unknown-or-uncertified-account")
        return ResolvedBeneficiary(
            certificate=cert,
            home_vasp_id=self.actor_id,
            home_vasp_certificate=self.certificate,
            resolution_path=(self.actor_id,),
            network_path=(self.primary_network,) if self.primary_network else (),
            account_id=account_id,
        )

    def _resolve_locally(self, key_hash: bytes) -> Optional[ResolvedBeneficiary]:
        account = self._account_by_key_hash(key_hash)
        if account is not None and account.certificate is not None:
            return ResolvedBeneficiary(
                certificate=account.certificate,
                home_vasp_id=self.actor_id,
                home_vasp_certificate=self.certificate,
                resolution_path=(self.actor_id,),
                network_path=(self.primary_network,) if self.primary_network else (),
                account_id=account.account_id,
            )
        cached = self.resolution_cache.get(key_hash)
        if cached is not None:
            return replace(cached, resolution_path=(self.actor_id,))
        return None

    def _from_response(self, response: QueryResponse, path: Tuple[str, ...], networks: Tuple[str, ...]) -> ResolvedBeneficiary:
        attributes = None
        assertion = response.assertion
        if assertion is not None and verify_assertion(assertion, response.responder_certificate,
                                                      response.certificate, self.validate):
            attributes = dict(assertion.attributes)
        return ResolvedBeneficiary(
            certificate=response.certificate,
            home_vasp_id=response.responder_vasp_id,
            home_vasp_certificate=response.responder_certificate,
            resolution_path=tuple(path),
            network_path=tuple(networks),
            attributes=attributes,
            account_id=response.account_id,
            revoked=response.status is QueryStatus.REVOKED,
        )

    def _query_response(self, account: Account) -> Optional[QueryResponse]:
        cert = self.handler_for(account).subject_certificate(account)
        if cert is None:
            return None
        revoked = self.revocations.is_revoked(cert.issuer_id, cert.serial)
        assertion = None
        if not revoked:
            try:
                assertion = self._disclosed_assertion(account, cert)
            except TravelRuleError:
                assertion = None
        return QueryResponse(
            certificate=cert,
            responder_vasp_id=self.actor_id,
            responder_certificate=self.certificate,
            status=QueryStatus.REVOKED if revoked else QueryStatus.GOOD,
            assertion=assertion,
            account_id=account.account_id,
        )

    def answer_cert_query(self, key_hash: bytes) -> QueryResult:
        account = self._account_by_key_hash(key_hash)
        response = self._query_response(account) if account is not None and account.certificate else None
        return response if response is not None else NotFound("not-held", (self.actor_id,))

    def answer_account_inquiry(self, inquiry: AccountInquiry) -> QueryResult:
        account = self.accounts.get(inquiry.account_id)
        response = self._query_response(account) if account is not None else None
        return response if response is not None else NotFound("unknown-account", (self.actor_id,))

    # Cross-network routing

    def _link_to(self, vasp_id: Optional[str]) -> Optional[PeeringLink]:
        for link in self.links:
            if link.remote_end(self.actor_id)[0] == vasp_id:
                return link
        return None

    def _network_facing(self, sender: Optional[str]) -> Optional[str]:
        link = self._link_to(sender)
        if link is not None:
            return link.local_network(self.actor_id)
        for network_id in sorted(self.networks):
            if sender in self.networks[network_id].members:
                return network_id
        return self.primary_network

    def _same_network_gateway(self, vasp_id: Optional[str]) -> bool:
        return any(vasp_id in c.gateways for c in self.networks.values()) and vasp_id != self.actor_id

    def _route_query(self, query: CrossNetworkQuery, arrived_from: Optional[str]) -> Generator:
        """
        Answer or forward a cross-network query

        The home gateway resolves inside its own network; any other gateway
        forwards along its best route and waits until the query's deadline.
        """
        key_hash = bytes(query.public_key_hash)
        network_id = self._network_facing(arrived_from)
        here = query if arrived_from is None else query.forwarded(self.actor_id, network_id)
        across_link = self._link_to(arrived_from) is not None
        relayed = self._same_network_gateway(arrived_from)

        account = self._account_by_key_hash(key_hash)
        if account is not None and account.certificate is not None:
            response = self._query_response(account)
            if response is not None:
                return replace(response, hops=here.hops, networks=here.networks)

        if across_link or relayed:
            members = [m for m in self.members_of(network_id) if m != self.actor_id]
            for owner, _ in self.directory.find(key_hash, owners=members):
                response = yield from self.request(owner, "cert_query", key_hash, self.rpc_timeout)
                if isinstance(response, QueryResponse):
                    return replace(response, hops=here.hops + (owner,), networks=here.networks)

        route = self.routes.best_route(key_hash, direct_only=relayed)
        if route is None or route.next_hop in here.hops:
            return NotFound("no-route", here.hops)

        wait = query.deadline - self.now - self.bus.max_latency
        if wait < 1:
            return NotFound("deadline", here.hops)
        response = yield from self.request(route.next_hop, "xnet_query", here, wait)
        if response is None:
            self.record("xnet_query_lost", next_hop=route.next_hop, path=here.hops)
            return NotFound("next-hop-unresponsive", here.hops + (route.next_hop,))
        return response

    def _serve_xnet_query(self, envelope: Envelope) -> Generator:
        response = yield from self._route_query(envelope.payload, envelope.sender)
        self.reply(envelope, response)

    def network_key_hashes(self, network_id: str) -> Set[bytes]:
        """Everything the network's directory lists, as this gateway sees it"""
        members = [m for m in self.members_of(network_id) if m != self.actor_id]
        hashes = self.directory.key_hashes(owners=members)
        hashes |= {e.public_key_hash for e in self._live_entries()}
        return hashes

    def advertise_all(self):
        """Send own-network and best learned routes across every link, then relay inside the network"""
        for link in self.links:
            local_network = link.local_network(self.actor_id)
            remote, _ = link.remote_end(self.actor_id)
            own = advertise_reachability(self.network_key_hashes(local_network), self.actor_id,
                                         self.keypair, local_network)
            self.send(remote, "advertisement", own)
            for route in self.routes.best_per_origin():
                self._advertise_route(route, link)
        self._relay_routes()

    def _advertise_route(self, route: Route, link: PeeringLink):
        local_network = link.local_network(self.actor_id)
        remote, _ = link.remote_end(self.actor_id)
        # split horizon
        if route.next_hop == remote or local_network in route.network_path:
            return
        unsigned = ReachabilityAdvertisement(
            advertised_hashes=route.hashes,
            home_vasp_id=route.home_vasp_id,
            origin_network_id=route.origin_network_id,
            network_path=route.network_path + (local_network,),
            advertising_gateway_id=self.actor_id,
        )
        self.send(remote, "advertisement", sign_advertisement(unsigned, self.keypair))

    def _relay_routes(self):
        direct = self.routes.best_per_origin(direct_only=True)
        if not direct:
            return
        for context in self.networks.values():
            for gateway in context.gateways:
                if gateway == self.actor_id:
                    continue
                for route in direct:
                    self.send(gateway, "route_relay", route)

    def _on_advertisement(self, envelope: Envelope):
        adv: ReachabilityAdvertisement = envelope.payload
        link = self._link_to(envelope.sender)
        if link is None:
            self.advertisements_dropped += 1
            self.record("advertisement_dropped", sender=envelope.sender, reason="not-a-peer")
            return

        outcome = process_advertisement(
            self.routes,
            link.local_network(self.actor_id),
            adv,
            link,
            self.actor_id,
            self.peer_certificates.get(envelope.sender),
        )
        if not isinstance(outcome, Accept):
            self.advertisements_dropped += 1
            self.record("advertisement_dropped", sender=envelope.sender, reason=outcome.reason,
                        path=adv.network_path)
            return

        self.advertisements_accepted += 1
        if outcome.changed:
            self.record("route_installed", origin=adv.origin_network_id, path=adv.network_path,
                        next_hop=envelope.sender, hashes=len(adv.advertised_hashes))
            best = self.routes.best_per_origin()
            for other in self.links:
                if other is link:
                    continue
                for route in best:
                    if route.origin_network_id == adv.origin_network_id:
                        self._advertise_route(route, other)
            self._relay_routes()

    def _on_route_relay(self, envelope: Envelope):
        route: Route = envelope.payload
        if not self._same_network_gateway(envelope.sender):
            return
        if any(network_id in route.network_path for network_id in self.networks):
            return
        install_relayed(self.routes, route, envelope.sender)

    # Directory gossip and CRL exchange

    def _live_entries(self) -> List[DirectoryEntry]:
        entries = []
        for account_id in sorted(self.accounts):
            cert = self.accounts[account_id].certificate
            if cert is None or self.revocations.is_revoked(cert.issuer_id, cert.serial):
                continue
            if not cert.within_validity(self.now):
                continue
            entries.append(DirectoryEntry(cert.serial, bytes(cert.public_key_hash), cert.issuer_id))
        return entries

    def publish_directory(self) -> DirectorySnapshot:
        """Publish the next directory version and gossip its delta to every network peer"""
        snapshot, delta = self.publisher.publish(self._live_entries())
        snapshot = replace(snapshot, signature=sign(self.keypair.private_key, snapshot.tbs_bytes()))
        delta = replace(delta, signature=sign(self.keypair.private_key, delta.tbs_bytes()))
        self._signed_snapshot = snapshot
        for peer in self.network_peers():
            self.send(peer, "directory_delta", delta)
        if not delta.is_empty:
            self.record("directory_published", version=snapshot.version, entries=len(snapshot.entries))
        return snapshot

    def _publisher_key(self, owner: str) -> Optional[bytes]:
        cert = self.peer_certificates.get(owner)
        return cert.subject_public_key if cert else None

    def _on_directory_delta(self, envelope: Envelope):
        delta: DirectoryDelta = envelope.payload
        key = self._publisher_key(delta.owner_vasp_id)
        if key is None or delta.owner_vasp_id != envelope.sender or not verify(key, delta.tbs_bytes(), delta.signature):
            self._logger.warning("directory delta dropped", owner=delta.owner_vasp_id)
            return
        if delta.to_version <= self.directory.version_of(delta.owner_vasp_id):
            return
        result = self.directory.apply_delta(delta)
        if isinstance(result, ResyncRequired):
            self.send(delta.owner_vasp_id, "directory_pull", result.have_version)
            return
        self.directory.purge_revoked(self.revocations)

    def _on_directory_snapshot(self, envelope: Envelope):
        snapshot: DirectorySnapshot = envelope.payload
        key = self._publisher_key(snapshot.owner_vasp_id)
        if key is None or not verify(key, snapshot.tbs_bytes(), snapshot.signature):
            self._logger.warning("directory snapshot dropped", owner=snapshot.owner_vasp_id)
            return
        if self.directory.install_snapshot(snapshot):
            self.directory.purge_revoked(self.revocations)
            self.record("directory_resynced", owner=snapshot.owner_vasp_id, version=snapshot.version)

    def exchange_revocations(self):
        """Send the full revocation view (signed CRLs and deltas) to every network peer"""
        items = tuple(self.revocations.export())
        if not items:
            return
        for peer in self.network_peers():
            self.send(peer, "crl_exchange", items)

    def _revocations_changed(self):
        self.directory.purge_revoked(self.revocations)
        for key_hash in list(self.resolution_cache):
            cert = self.resolution_cache[key_hash].certificate
            if self.revocations.is_revoked(cert.issuer_id, cert.serial):
                del self.resolution_cache[key_hash]

    def _on_crl(self, envelope: Envelope):
        item = envelope.payload
        issuer = self.anchor_map.get(item.issuer_id)
        if issuer is None:
            return
        if isinstance(item, DeltaCrl):
            applied = self.revocations.apply_delta(item, issuer)
            if not applied and item.base_crl_number > self.revocations.crl_number(item.issuer_id):
                self.send(envelope.sender, "crl_pull", self.revocations.crl_number(item.issuer_id))
                return
        elif isinstance(item, Crl):
            applied = self.revocations.apply_crl(item, issuer)
        else:
            return
        if applied:
            self._revocations_changed()
            self.record("crl_applied", issuer=item.issuer_id, number=item.crl_number)

    def _on_crl_exchange(self, envelope: Envelope):
        if self.revocations.merge(envelope.payload, self.anchor_map):
            self._revocations_changed()
            self.record("crl_merged", sender=envelope.sender)

    # Transfers: originator side

    def initiate_transfer(self, account_id: str, target: Target, amount: int, asset_type: str = DEFAULT_ASSET):
        """
        Run the pre-transfer pipeline and, on Accept, broadcast (use with ``yield from``)

        Returns:
            Broadcast(chain_tx_id, record_id) or Denied(reason)
        """
        if amount <= 0:
            raise ValueError("amount must be > 0")
        outcome = yield from self.initiate_batch([TransferRequest(account_id, target, amount)], asset_type)
        return outcome

    def initiate_batch(self, requests: Sequence[TransferRequest], asset_type: str = DEFAULT_ASSET):
        """
        Commingled batch transfer: one notice and one on-chain transaction

        A single request from a non-commingled account runs as a plain transfer.

        Raises:
            MixedDestination: Requests resolve to different Beneficiary-VASPs
        """
        if not requests:
            raise ValueError("nothing to transfer")
        accounts = [self._account(r.account_id) for r in requests]
        commingled = accounts[0].custody_model is CustodyModel.COMMINGLED
        if len(requests) > 1 and not all(a.custody_model is CustodyModel.COMMINGLED for a in accounts):
            raise ValueError("only commingled accounts can be batched")

        self.record("transfer_attempted", accounts=[a.account_id for a in accounts],
                    amount=sum(r.amount for r in requests))
        outcome = yield from self._pipeline(list(requests), accounts, commingled, asset_type)
        if isinstance(outcome, Denied):
            self._logger.info("transfer denied", reason=outcome.label, accounts=len(accounts))
            self.record("transfer_denied", reason=outcome.label)
        else:
            self.record("transfer_broadcast", tx=outcome.chain_tx_id, record=outcome.record_id)
        return outcome

    def _validate_parties(self, subject_cert: Certificate, resolved: ResolvedBeneficiary) -> Optional[Denied]:
        chain_id = self.ledger.chain_id
        checks = (
            ("originator", subject_cert, chain_id),
            ("originator_vasp", self.certificate, None),
            ("beneficiary_vasp", resolved.home_vasp_certificate, None),
            ("beneficiary", resolved.certificate, chain_id),
        )
        for which, cert, chain in checks:
            if cert is None or not self.validate(cert, chain).ok:
                return Denied(DenyReason.CERT_INVALID, which)
        if resolved.revoked:
            return Denied(DenyReason.CERT_INVALID, "beneficiary")
        return None

    def _pipeline(self, requests: List[TransferRequest], accounts: List[Account], commingled: bool, asset_type: str):
        for request, account in zip(requests, accounts):
            if not self.screen_suspect(self._account_refs(account) + request.target.party_refs()):
                return Denied(DenyReason.SUSPECT_PARTY)

        subject_certs = [self.handler_for(a).subject_certificate(a) for a in accounts]
        if any(cert is None for cert in subject_certs):
            return Denied(DenyReason.NO_ORIGINATOR_CERT)

        resolved: List[ResolvedBeneficiary] = []
        for request in requests:
            result = yield from self.resolve_beneficiary(request.target)
            if isinstance(result, Unresolved):
                return Denied(DenyReason.BENEFICIARY_UNRESOLVED)
            if not self.screen_suspect(result.beneficiary_ref.party_refs()):
                return Denied(DenyReason.SUSPECT_PARTY)
            resolved.append(result)

        for subject_cert, target in zip(subject_certs, resolved):
            denied = self._validate_parties(subject_cert, target)
            if denied is not None:
                return denied

        try:
            assertions = [self._disclosed_assertion(a, c) for a, c in zip(accounts, subject_certs)]
        except SubjectCertInvalid:
            return Denied(DenyReason.CERT_INVALID, "originator")
        except EmptyDisclosure:
            return Denied(DenyReason.POLICY_REFUSAL)

        if commingled:
            prepared = self.build_commingled_batch(
                [(r, a, res, assertion) for r, a, res, assertion in zip(requests, accounts, resolved, assertions)],
                asset_type,
            )
        else:
            prepared = self._prepare_plain(requests[0], accounts[0], resolved[0], assertions[0], asset_type)

        notice = prepared.notice
        record = self.records.create(Role.ORIGINATOR_SIDE, notice, self.now)
        self.record("notice_sent", notice=notice.notice_id, binding=notice.intended_chain_tx_binding,
                    record=record.record_id, beneficiary_vasp=notice.beneficiary_vasp_id)

        ack = yield from self.request(notice.beneficiary_vasp_id, "transfer_notice", notice, self.rules.ack_timeout)
        if ack is None:
            record.transition(RecordStatus.FAILED, self.now, DenyReason.CHANNEL_TIMEOUT.value)
            return Denied(DenyReason.CHANNEL_TIMEOUT)

        beneficiary_vasp_cert = resolved[0].home_vasp_certificate
        if not isinstance(ack, TransferAck) or ack.notice_id != notice.notice_id \
                or not ack.signature_valid(beneficiary_vasp_cert):
            record.transition(RecordStatus.FAILED, self.now, "CertInvalid(beneficiary_vasp)")
            return Denied(DenyReason.CERT_INVALID, "beneficiary_vasp")

        if not ack.accepted:
            denied = Denied(DenyReason.ACK_REJECTED, ack.reason.value)
            record.transition(RecordStatus.FAILED, self.now, denied.label)
            return denied

        if not self._ack_assertions_valid(ack, resolved, beneficiary_vasp_cert):
            record.transition(RecordStatus.FAILED, self.now, "CertInvalid(beneficiary)")
            return Denied(DenyReason.CERT_INVALID, "beneficiary")

        record.ack = ack
        self.record("ack_accepted", notice=notice.notice_id, binding=notice.intended_chain_tx_binding,
                    record=record.record_id)
        try:
            tx_id = self.execute_onchain(record, prepared.transaction, prepared.account)
        except KeyUnavailable as e:
            self._logger.warning("execution failed", record=record.record_id, error=str(e))
            record.transition(RecordStatus.FAILED, self.now, DenyReason.KEY_UNAVAILABLE.value)
            return Denied(DenyReason.KEY_UNAVAILABLE)
        if tx_id is None:
            return Denied(DenyReason.CHAIN_REJECTED, record.failure_reason or "")
        return Broadcast(chain_tx_id=tx_id, record_id=record.record_id)

    def _ack_assertions_valid(self, ack: TransferAck, resolved: List[ResolvedBeneficiary], vasp_cert: Certificate) -> bool:
        if len(ack.beneficiary_assertions) != len(resolved):
            return False
        return all(
            verify_assertion(assertion, vasp_cert, target.certificate, self.validate)
            for assertion, target in zip(ack.beneficiary_assertions, resolved)
        )

    def _new_notice_id(self) -> bytes:
        return self._rng.getrandbits(128).to_bytes(16, 'big')

    def _prepare_plain(
        self,
        request: TransferRequest,
        account: Account,
        target: ResolvedBeneficiary,
        assertion: AttributeAssertion,
        asset_type: str,
    ) -> PreparedTransfer:
        handler = self.handler_for(account)
        notice_id = self._new_notice_id()
        tx = handler.prepare_transaction(account, target.certificate.subject_public_key, request.amount,
                                         asset_type, notice_id[:8])
        notice = TransferNotice(
            notice_id=notice_id,
            originator_vasp_id=self.actor_id,
            beneficiary_vasp_id=target.home_vasp_id,
            originator_assertion=assertion,
            beneficiary_ref=target.beneficiary_ref,
            asset_type=asset_type,
            amount=request.amount,
            execution_tick=self.now,
            intended_chain_tx_binding=tx.tx_id,
            originator_vasp_certificate=self.certificate,
            originator_subject_certificate=handler.subject_certificate(account),
            originator_evidence=handler.key_evidence(account),
        ).signed(self.keypair)
        return PreparedTransfer(notice, tx, account)

    def build_commingled_batch(
        self,
        items: Sequence[Tuple[TransferRequest, Account, ResolvedBeneficiary, AttributeAssertion]],
        asset_type: str = DEFAULT_ASSET,
    ) -> PreparedTransfer:
        """
        Merge commingled transfers into one notice and one VASP-key transaction

        Args:
            items: (request, originator account, resolved beneficiary, originator assertion)

        Returns:
            PreparedTransfer whose transaction amount equals the sum of the entries

        Raises:
            MixedDestination: Entries resolve to more than one Beneficiary-VASP
        """
        if not items:
            raise ValueError("batch needs at least one request")
        destinations = {target.home_vasp_id for _, _, target, _ in items}
        if len(destinations) != 1:
            raise MixedDestination(f"batch targets {sorted(destinations)}")

        home_cert = items[0][2].home_vasp_certificate
        entries = tuple(
            BatchEntry(target.beneficiary_ref, request.amount, account.account_id, assertion)
            for request, account, target, assertion in items
        )
        total = sum(e.amount for e in entries)
        handler = self.custody[CustodyModel.COMMINGLED]
        account = items[0][1]
        notice_id = self._new_notice_id()
        tx = handler.prepare_transaction(account, home_cert.subject_public_key, total, asset_type, notice_id[:8])
        notice = TransferNotice(
            notice_id=notice_id,
            originator_vasp_id=self.actor_id,
            beneficiary_vasp_id=home_cert.subject_id,
            originator_assertion=entries[0].originator_assertion,
            beneficiary_ref=BeneficiaryRef(bytes(home_cert.public_key_hash)),
            asset_type=asset_type,
            amount=total,
            execution_tick=self.now,
            intended_chain_tx_binding=tx.tx_id,
            originator_vasp_certificate=self.certificate,
            originator_subject_certificate=self.certificate,
            originator_evidence=handler.key_evidence(account),
            batch_entries=entries,
        ).signed(self.keypair)
        return PreparedTransfer(notice, tx, account)

    def execute_onchain(self, record: TravelRuleRecord, prepared_tx: ChainTransaction, account: Account) -> Optional[bytes]:
        """
        Sign with the model-appropriate key and submit

        Returns:
            chain tx id, or None if the chain rejected the transaction

        Raises:
            KeyUnavailable: Signing key cannot be reached
        """
        if record.ack is None or not record.ack.accepted:
            raise ValueError(f"{record.record_id}: execution requires an accepted ack")

        tx = prepared_tx
        if self.tamper_next_execution:
            self.tamper_next_execution = False
            tx = replace(tx, amount=tx.amount + 1)

        signed = self.handler_for(account).sign_transaction(account, tx)
        result = self.ledger.submit_transaction(signed, self.now)
        if isinstance(result, Rejected):
            record.transition(RecordStatus.FAILED, self.now, f"Chain{result.reason.value}")
            self.record("tx_rejected", record=record.record_id, reason=result.reason)
            return None

        record.chain_tx_id = bytes(result)
        record.transition(RecordStatus.PENDING_CHAIN, self.now)
        self.record("tx_submitted", tx=result, binding=record.binding, record=record.record_id)
        return bytes(result)

    # Transfers: beneficiary side

    def _reject(self, notice: TransferNotice, reason: RejectReason) -> TransferAck:
        self.record("notice_rejected", notice=notice.notice_id, reason=reason)
        return TransferAck(
            notice_id=notice.notice_id,
            beneficiary_vasp_id=self.actor_id,
            decision=AckDecision.REJECT,
            reason=reason,
            beneficiary_vasp_certificate=self.certificate,
        ).signed(self.keypair)

    def handle_transfer_notice(self, notice: TransferNotice) -> Optional[TransferAck]:
        """
        Validate an incoming notice and decide

        Returns:
            Signed TransferAck, or None when the notice is dropped (bad
            signature or not addressed to this VASP)
        """
        if notice.beneficiary_vasp_id != self.actor_id or not notice.signature_valid() \
                or notice.originator_vasp_certificate.subject_id != notice.originator_vasp_id:
            self._logger.warning("notice dropped", notice=notice.notice_id.hex())
            self.record("notice_dropped", notice=notice.notice_id, originator=notice.originator_vasp_id)
            return None

        originator_vasp_cert = notice.originator_vasp_certificate
        originator_cert = notice.originator_subject_certificate
        if not self.validate(originator_vasp_cert).ok or not self.validate(originator_cert, self.ledger.chain_id).ok:
            return self._reject(notice, RejectReason.CERT_INVALID)

        entries = notice.entries()
        for entry in entries:
            assertion = entry.originator_assertion
            if assertion is None or not verify_assertion(assertion, originator_vasp_cert, originator_cert, self.validate):
                return self._reject(notice, RejectReason.CERT_INVALID)

        allowed = self.rules.required_disclosure_policy.allowed_attributes
        if self.supported_assets is not None and notice.asset_type not in self.supported_assets:
            return self._reject(notice, RejectReason.POLICY_REFUSAL)
        if any(set(e.originator_assertion.attributes) - allowed for e in entries):
            return self._reject(notice, RejectReason.POLICY_REFUSAL)

        beneficiaries: List[Account] = []
        for entry in entries:
            account = self._account_for_ref(entry.beneficiary_ref)
            if account is None:
                return self._reject(notice, RejectReason.UNKNOWN_BENEFICIARY)
            beneficiaries.append(account)

        refs: List[str] = []
        for entry, account in zip(entries, beneficiaries):
            refs.append(entry.originator_account_id)
            refs.append(entry.originator_assertion.attributes.get("public_key_hash", ""))
            refs.extend(entry.beneficiary_ref.party_refs())
            refs.extend(self._account_refs(account))
        if not self.screen_suspect(refs):
            return self._reject(notice, RejectReason.SUSPECT_PARTY)

        certificates: List[Certificate] = []
        for account in beneficiaries:
            cert = self.handler_for(account).subject_certificate(account)
            if cert is None or not self.validate(cert, self.ledger.chain_id).ok:
                return self._reject(notice, RejectReason.CERT_INVALID)
            certificates.append(cert)

        try:
            assertions = tuple(self._disclosed_assertion(a, c) for a, c in zip(beneficiaries, certificates))
        except SubjectCertInvalid:
            return self._reject(notice, RejectReason.CERT_INVALID)
        except EmptyDisclosure:
            return self._reject(notice, RejectReason.POLICY_REFUSAL)

        ack = TransferAck(
            notice_id=notice.notice_id,
            beneficiary_vasp_id=self.actor_id,
            decision=AckDecision.ACCEPT,
            beneficiary_assertions=assertions,
            beneficiary_certificates=tuple(certificates),
            beneficiary_evidences=tuple(self.handler_for(a).key_evidence(a) for a in beneficiaries),
            beneficiary_vasp_certificate=self.certificate,
        ).signed(self.keypair)
        record = self.records.create(Role.BENEFICIARY_SIDE, notice, self.now, ack=ack, status=RecordStatus.PENDING_CHAIN)
        self.record("notice_accepted", notice=notice.notice_id, binding=notice.intended_chain_tx_binding,
                    record=record.record_id)
        return ack

    def _serve_transfer_notice(self, envelope: Envelope):
        ack = self.handle_transfer_notice(envelope.payload)
        if ack is not None:
            self.reply(envelope, ack)

    # Chain events

    def on_chain_confirmation(self, event: ConfirmationEvent) -> List[TravelRuleRecord]:
        """
        Move records bound to a confirmed transaction

        Returns:
            Records updated by this confirmation
        """
        tx_id = bytes(event.tx_id)
        updated: List[TravelRuleRecord] = []

        for record in self.records.by_chain_tx(tx_id):
            if record.role is not Role.ORIGINATOR_SIDE or record.status is not RecordStatus.PENDING_CHAIN:
                continue
            if record.binding == tx_id:
                record.transition(RecordStatus.CONFIRMED, event.tick)
                self.record("record_confirmed", record=record.record_id, tx=tx_id)
            else:
                record.transition(RecordStatus.FAILED, event.tick, "BindingMismatch")
                self._logger.warning("binding mismatch", record=record.record_id)
                self.record("record_failed", record=record.record_id, tx=tx_id, reason="BindingMismatch")
                self.send(record.notice.beneficiary_vasp_id, "binding_mismatch",
                          BindingMismatchReport(record.notice_id, tx_id))
            updated.append(record)

        for record in self.records.by_binding(tx_id):
            if record.role is not Role.BENEFICIARY_SIDE or record.status is not RecordStatus.PENDING_CHAIN:
                continue
            record.chain_tx_id = tx_id
            record.transition(RecordStatus.CONFIRMED, event.tick)
            self.record("record_confirmed", record=record.record_id, tx=tx_id)
            updated.append(record)

        if not updated:
            keys = self.known_keys()
            if event.tx.from_public_key in keys or event.tx.to_public_key in keys:
                self._logger.debug("confirmation without record", tx=tx_id.hex()[:12])
        return updated

    def _on_binding_mismatch(self, envelope: Envelope):
        """Fail the pending beneficiary record once the ledger confirms the originator's report"""
        report: BindingMismatchReport = envelope.payload
        found = self.ledger.find(report.chain_tx_id)
        if found is None:
            return
        tx, tick = found
        for record in self.records:
            if record.role is not Role.BENEFICIARY_SIDE or record.status is not RecordStatus.PENDING_CHAIN:
                continue
            notice = record.notice
            if record.notice_id != report.notice_id or envelope.sender != notice.originator_vasp_id:
                continue
            if tx.tx_id == record.binding \
                    or tx.from_public_key != notice.originator_subject_certificate.subject_public_key:
                continue
            record.chain_tx_id = bytes(tx.tx_id)
            record.transition(RecordStatus.FAILED, self.now, "BindingMismatch")
            self._logger.warning("binding mismatch reported", record=record.record_id, confirmed_at=tick)
            self.record("record_failed", record=record.record_id, tx=tx.tx_id, reason="BindingMismatch")

    def return_transfer(self, chain_tx_id: bytes) -> bytes:
        """
        Send an unannounced inbound transfer back in a new transaction

        Raises:
            ValueError: Unknown, outbound or record-matched transaction
            KeyUnavailable: Destination key is not one this VASP operates
        """
        found = self.ledger.find(chain_tx_id)
        if found is None:
            raise ValueError(f"{bytes(chain_tx_id).hex()} is not confirmed")
        tx, _ = found
        if self.records.by_chain_tx(chain_tx_id) or self.records.by_binding(chain_tx_id):
            raise ValueError("transfer is matched by a travel-rule record")

        if tx.to_public_key == self.keypair.public_key:
            private_key = self.keypair.private_key
        else:
            owned = [a for a in self.accounts.values()
                     if a.customer_public_key == tx.to_public_key and a.custodied_private_key is not None]
            if not owned:
                raise KeyUnavailable("destination key is not operated by this VASP")
            private_key = owned[0].custodied_private_key

        back = ChainTransaction(
            from_public_key=tx.to_public_key,
            to_public_key=tx.from_public_key,
            amount=tx.amount,
            asset_type=tx.asset_type,
            nonce=digest(b"return" + bytes(chain_tx_id))[:8],
        ).signed(private_key)
        result = self.ledger.submit_transaction(back, self.now)
        if isinstance(result, Rejected):
            raise ValueError(f"return rejected: {result.reason.value}")
        self.returns[bytes(result)] = bytes(chain_tx_id)
        self.record("return_submitted", tx=result, returns=chain_tx_id)
        return bytes(result)

    # Reports

    def reconcile(self) -> ReconciliationReport:
        return reconcile(self.actor_id, self.records, self.ledger, self.known_keys(), self.returns)

    def audit_travel_rule(self) -> AuditReport:
        return audit_travel_rule(self.actor_id, self.records)

    def export_evidence(self, record_id: str) -> EvidenceBundle:
        record = self.records.get(record_id)
        if record is None:
            raise KeyError(record_id)
        found = self.ledger.find(record.chain_tx_id) if record.chain_tx_id else None
        return EvidenceBundle(
            record_id=record_id,
            notice_bytes=record.notice.to_bytes(),
            ack_bytes=record.ack.to_bytes() if record.ack else None,
            chain_tx=found[0] if found else None,
            confirmed_tick=found[1] if found else None,
        )

    # Dispatch

    def handle_message(self, envelope: Envelope):
        kind = envelope.kind
        if kind == "transfer_notice":
            self._serve_transfer_notice(envelope)
        elif kind == "cert_query":
            self.reply(envelope, self.answer_cert_query(envelope.payload))
        elif kind == "account_inquiry":
            self.reply(envelope, self.answer_account_inquiry(envelope.payload))
        elif kind == "xnet_query":
            return self._serve_xnet_query(envelope)
        elif kind == "directory_delta":
            self._on_directory_delta(envelope)
        elif kind == "directory_pull":
            self.send(envelope.sender, "directory_snapshot", self._signed_snapshot)
        elif kind == "directory_snapshot":
            self._on_directory_snapshot(envelope)
        elif kind == "crl":
            self._on_crl(envelope)
        elif kind == "crl_exchange":
            self._on_crl_exchange(envelope)
        elif kind == "advertisement":
            self._on_advertisement(envelope)
        elif kind == "route_relay":
            self._on_route_relay(envelope)
        elif kind == "binding_mismatch":
            self._on_binding_mismatch(envelope)
        else:
            self._logger.debug("unhandled message", kind=kind, sender=envelope.sender)
        return None
