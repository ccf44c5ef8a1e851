"""
Builds a world from a scenario, drives it tick by tick and collects the results
File: simulation/harness.py
"""
from dataclasses import dataclass, field
from typing import Dict, Generator, List, Optional, Tuple

import simpy

from chain.chain_sim import ChainTransaction, Ledger, Rejected
from networks.operating_rules import OperatingRules
from networks.path_vector import PeeringLink
from networks.trust_network import TrustNetworkRegistry
from pki.certificate_authority import CertificateAuthority, Validity
from pki.certificates import VASP_PROFILE, CertificateClass, CertificateProfile
from pki.crypto_core import digest, generate_keypair
from simulation.ca_node import CaNode
from simulation.event_log import EventLog, Metrics
from simulation.invariants import run_all
from simulation.message_bus import MessageBus
from simulation.scenario import (
    BatchTransferAction,
    CustomerSpec,
    DropLinkAction,
    EnrollAction,
    OpenAccountAction,
    P2PTransferAction,
    RevokeCertAction,
    Scenario,
    TamperExecutionAction,
    TargetSpec,
    TransferAction,
)
from utils.errors import TravelRuleError
from utils.id_utils import derive_rng, derive_seed, from_hex
from utils.logging_utils import get_logger
from vasps.accounts import Account, CustodyModel
from vasps.compliance import AuditReport, ReconciliationReport
from vasps.custody import CustomerWallet
from vasps.messages import Broadcast, Denied, Target, TransferRequest
from vasps.records import RecordStatus, Role
from vasps.vasp_node import VaspNode

logger = get_logger("harness")

VASP_CERT_VALIDITY = Validity(0, 1_000_000)


@dataclass
class TransferResult:
    """What one scripted transfer (or batch) came to"""
    tick: int
    vasp_id: str
    accounts: Tuple[str, ...]
    outcome: Optional[object] = None
    error: Optional[str] = None

    @property
    def label(self) -> str:
        if self.error is not None:
            return f"Error({self.error})"
        if isinstance(self.outcome, Denied):
            return self.outcome.label
        if isinstance(self.outcome, Broadcast):
            return "Broadcast"
        return "InFlight"


@dataclass
class RunResult:
    scenario: Scenario
    log: EventLog
    metrics: Metrics
    ledger: Ledger
    nodes: Dict[str, VaspNode]
    cas: Dict[str, CaNode]
    registry: TrustNetworkRegistry
    transfers: List[TransferResult] = field(default_factory=list)
    audits: List[AuditReport] = field(default_factory=list)
    reconciliations: List[ReconciliationReport] = field(default_factory=list)
    breaches: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.breaches


class Simulation:
    """
    One scenario run

    Setup happens at tick 0: CAs certify every VASP, VASPs join their
    networks and peering links, customers with auto_open / auto_enroll get
    accounts and certificates. The script then runs against the clock, and
    after the drain period the harness reconciles, audits and checks
    invariants.

    Args:
        scenario: Validated scenario
    """

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        settings = scenario.settings
        self.seed = scenario.seed
        self.env = simpy.Environment()
        self.log = EventLog()
        self.bus = MessageBus(self.env, self.seed, settings.max_latency, settings.drop_probability, self.log)
        self.ledger = Ledger(settings.confirmation_delay, settings.chain_id)
        self.metrics = Metrics()
        self._rng = derive_rng(self.seed, "harness")

        self.authorities: Dict[str, CertificateAuthority] = {}
        self.cas: Dict[str, CaNode] = {}
        self.nodes: Dict[str, VaspNode] = {}
        self.wallets: Dict[str, CustomerWallet] = {}
        self.registry: Optional[TrustNetworkRegistry] = None
        self.transfers: List[TransferResult] = []
        self._transfer_processes: List[simpy.Process] = []
        self._converged_since: Optional[int] = 0

        self._build()

    # Setup

    @property
    def now(self) -> int:
        return int(self.env.now)

    def _network_rules(self) -> Dict[str, OperatingRules]:
        return {n.network_id: OperatingRules().with_overrides(n.rules) for n in self.scenario.networks}

    def _build(self):
        scenario = self.scenario
        rules = self._network_rules()

        for spec in scenario.cas:
            self.authorities[spec.ca_id] = CertificateAuthority(
                spec.ca_id,
                generate_keypair(derive_seed(self.seed, "ca", spec.ca_id)),
                derive_rng(self.seed, "ca-serials", spec.ca_id),
                class_table=spec.class_table,
            )
        anchors = [ca.root for ca in self.authorities.values()]

        self.registry = TrustNetworkRegistry(anchors)
        for network_id, network_rules in rules.items():
            self.registry.add_network(network_id, network_rules)

        for spec in scenario.vasps:
            authority = self.authorities[spec.ca]
            keypair = generate_keypair(derive_seed(self.seed, "vasp-key", spec.vasp_id))
            node = VaspNode(spec.vasp_id, self.bus, self.log, keypair, self.ledger, authority, anchors,
                            self.seed, spec.supported_assets)
            node.certificate = self._certify_vasp(authority, spec.vasp_id, keypair.public_key, spec.attributes)
            ca_spec = next(c for c in scenario.cas if c.ca_id == spec.ca)
            if ca_spec.permitted_chains:
                node.customer_profile = CertificateProfile(f"customer@{spec.ca}",
                                                           permitted_chains=frozenset(ca_spec.permitted_chains))
            self.nodes[spec.vasp_id] = node
            for network_id in spec.networks:
                self.registry.join_network(node.certificate, network_id, rules[network_id].rules_version)

        for spec in scenario.peering_links:
            link = self.registry.add_peering_link(PeeringLink(
                spec.gateway_a, spec.network_a, spec.gateway_b, spec.network_b, spec.established_at,
            ))
            self.nodes[spec.gateway_a].add_link(link)
            self.nodes[spec.gateway_b].add_link(link)

        for vasp_id, node in self.nodes.items():
            for network_id in self.registry.networks_of(vasp_id):
                network = self.registry.networks[network_id]
                node.configure_network(network_id, network.rules, network.member_ids(),
                                       self.registry.gateways_of(network_id))
            node.peer_certificates = self.registry.peers_of(vasp_id)

        crl_period = min((r.crl_exchange_period for r in rules.values()), default=OperatingRules().crl_exchange_period)
        for ca_id, authority in self.authorities.items():
            self.cas[ca_id] = CaNode(authority, self.bus, self.log, crl_period, subscribers=self.nodes)

        for suspect in scenario.suspects:
            for vasp_id in suspect.vasps or sorted(self.nodes):
                self.nodes[vasp_id].suspects.add([suspect.entry])

        for wallet_id in scenario.wallets:
            self.wallets[wallet_id] = CustomerWallet(wallet_id, generate_keypair(derive_seed(self.seed, "wallet", wallet_id)))

        for customer in scenario.customers:
            if customer.auto_open:
                self._open_account(customer)
                if customer.auto_enroll:
                    self._enroll(customer)

        logger.info("world built", vasps=len(self.nodes), cas=len(self.cas), networks=len(rules),
                    links=len(scenario.peering_links), customers=len(scenario.customers))

    def _certify_vasp(self, authority: CertificateAuthority, vasp_id: str, public_key: bytes, extra: Dict[str, str]):
        attributes = {
            "name": vasp_id,
            "email": f"compliance@{vasp_id}.example",
            "government_id": f"lei-{vasp_id}",
            "address": f"{vasp_id} registered office",
            "organization_vetting_ref": f"vetting-{vasp_id}",
        }
        attributes.update(extra)
        attributes["vasp_id"] = vasp_id
        registration = authority.register_subject(vasp_id, attributes, CertificateClass.CLASS3)
        return authority.issue_certificate(registration, public_key, VASP_PROFILE, VASP_CERT_VALIDITY)

    def _open_account(self, customer: CustomerSpec) -> Account:
        node = self.nodes[customer.vasp]
        custody = self.scenario.custody_of(customer.customer_id)
        public_key = None
        if custody is CustodyModel.MEDIATED:
            wallet = CustomerWallet(customer.customer_id,
                                    generate_keypair(derive_seed(self.seed, "wallet", customer.customer_id)))
            node.attach_wallet(wallet)
            self.wallets[customer.customer_id] = wallet
            public_key = wallet.public_key
        return node.open_account(customer.customer_id, customer.attributes, custody, public_key,
                                 account_id=customer.customer_id)

    def _enroll(self, customer: CustomerSpec):
        node = self.nodes[customer.vasp]
        account = node.accounts.get(customer.customer_id)
        if account is None or account.custody_model is CustodyModel.COMMINGLED:
            return
        try:
            node.enroll_customer_certificate(account, requested_class=CertificateClass.parse(customer.requested_class))
        except TravelRuleError as e:
            logger.warning("enrollment failed", customer=customer.customer_id, error=str(e))
            node.record("enrollment_failed", account=customer.customer_id, error=type(e).__name__)

    def _account_of(self, customer_id: str) -> Tuple[VaspNode, Optional[Account]]:
        node = self.nodes[self.scenario.customer(customer_id).vasp]
        return node, node.accounts.get(customer_id)

    def _target(self, spec: TargetSpec) -> Target:
        if spec.public_key is not None:
            return Target.of_key(from_hex(spec.public_key))
        if spec.key_hash is not None:
            return Target.of_hash(from_hex(spec.key_hash))
        if spec.account is not None:
            return Target.of_account(spec.vasp, spec.account)

        node, account = self._account_of(spec.customer)
        if spec.form == "account" or account is None or account.customer_public_key is None:
            return Target.of_account(node.actor_id, spec.customer)
        if spec.form == "hash":
            return Target.of_hash(bytes(digest(account.customer_public_key)))
        return Target.of_key(account.customer_public_key)

    # Script

    def _dispatch(self, action):
        if isinstance(action, OpenAccountAction):
            self._open_account(self.scenario.customer(action.customer))
        elif isinstance(action, EnrollAction):
            self._enroll(self.scenario.customer(action.customer))
        elif isinstance(action, TransferAction):
            node = self.nodes[self.scenario.customer(action.origin).vasp]
            requests = [TransferRequest(action.origin, self._target(action.target), action.amount)]
            self._start_transfer(node, requests, action.asset_type)
        elif isinstance(action, BatchTransferAction):
            node = self.nodes[self.scenario.customer(action.transfers[0].origin).vasp]
            requests = [TransferRequest(item.origin, self._target(item.target), item.amount)
                        for item in action.transfers]
            self._start_transfer(node, requests, action.asset_type)
        elif isinstance(action, P2PTransferAction):
            self._p2p(action)
        elif isinstance(action, RevokeCertAction):
            self._revoke(action)
        elif isinstance(action, DropLinkAction):
            self.bus.drop_link(action.endpoint_a, action.endpoint_b, self.now, self.now + action.duration,
                               action.kinds)
            self.log.append(self.now, "harness", "link_dropped", a=action.endpoint_a, b=action.endpoint_b,
                            until=self.now + action.duration, kinds=sorted(action.kinds))
        elif isinstance(action, TamperExecutionAction):
            self.nodes[action.vasp].tamper_next_execution = True

    def _start_transfer(self, node: VaspNode, requests: List[TransferRequest], asset_type: str):
        missing = [r.account_id for r in requests if r.account_id not in node.accounts]
        if missing:
            logger.warning("transfer from unknown account skipped", vasp=node.actor_id, accounts=missing)
            self.log.append(self.now, "harness", "transfer_skipped", vasp=node.actor_id, accounts=missing)
            return
        result = TransferResult(self.now, node.actor_id, tuple(r.account_id for r in requests))
        self.transfers.append(result)
        self._transfer_processes.append(self.env.process(self._transfer(node, requests, asset_type, result)))

    def _transfer(self, node: VaspNode, requests: List[TransferRequest], asset_type: str, result: TransferResult):
        try:
            result.outcome = yield from node.initiate_batch(requests, asset_type)
        except TravelRuleError as e:
            result.error = type(e).__name__
            logger.warning("transfer aborted", vasp=node.actor_id, error=str(e))
            node.record("transfer_aborted", error=result.error)

    def _party_keys(self, party: str) -> Tuple[Optional[bytes], Optional[bytes]]:
        """(public key, private key if reachable) of a wallet or key-holding customer"""
        wallet = self.wallets.get(party)
        if wallet is not None:
            return wallet.public_key, wallet.keypair.private_key
        _, account = self._account_of(party)
        if account is None:
            return None, None
        return account.customer_public_key, account.custodied_private_key

    def _p2p(self, action: P2PTransferAction):
        sender_key, private_key = self._party_keys(action.sender)
        recipient_key, _ = self._party_keys(action.recipient)
        if private_key is None or recipient_key is None:
            logger.warning("p2p transfer skipped", sender=action.sender, recipient=action.recipient)
            return

        tx = ChainTransaction(
            from_public_key=sender_key,
            to_public_key=recipient_key,
            amount=action.amount,
            asset_type=action.asset_type,
            nonce=self._rng.getrandbits(64).to_bytes(8, 'big'),
        ).signed(private_key)
        submitted = self.ledger.submit_transaction(tx, self.now)
        if isinstance(submitted, Rejected):
            logger.warning("p2p rejected", reason=submitted.reason.value)
            return
        self.log.append(self.now, action.sender, "p2p_submitted", tx=submitted, to=action.recipient)

    def _revoke(self, action: RevokeCertAction):
        if action.vasp is not None:
            cert = self.nodes[action.vasp].certificate
        else:
            _, account = self._account_of(action.customer)
            cert = account.certificate if account else None
        if cert is None or cert.issuer_id not in self.cas:
            self.log.append(self.now, "harness", "revocation_skipped", subject=action.vasp or action.customer)
            return
        try:
            self.cas[cert.issuer_id].revoke(cert.serial, action.reason)
        except TravelRuleError as e:
            logger.warning("revocation failed", serial=cert.serial, error=str(e))

    def _script(self) -> Generator:
        for tick, action in self.scenario.timeline():
            if tick > self.now:
                yield self.env.timeout(tick - self.now)
            self._dispatch(action)

    # Clock-driven processes

    def _chain_clock(self) -> Generator:
        while True:
            self.ledger.tick(self.now)
            yield self.env.timeout(1)

    def views_converged(self) -> bool:
        """Every member's view of every co-member equals that co-member's latest publication"""
        for vasp_id in sorted(self.nodes):
            node = self.nodes[vasp_id]
            for peer in node.network_peers():
                published = self.nodes[peer].publisher.latest.entries
                if frozenset(node.directory.snapshot_of(peer).entries) != frozenset(published):
                    return False
        return True

    def _convergence_monitor(self) -> Generator:
        while True:
            if self.views_converged():
                if self._converged_since is None:
                    self._converged_since = self.now
            else:
                self._converged_since = None
            yield self.env.timeout(1)

    # Run

    def run(self) -> RunResult:
        for node in self.nodes.values():
            node.start()
        for ca in self.cas.values():
            ca.start()
        self.env.process(self._chain_clock())
        self.env.process(self._convergence_monitor())
        self.env.process(self._script())

        end = self.scenario.end_tick
        logger.info("simulation started", seed=self.seed, end_tick=end)
        self.env.run(until=end + 1)
        return self._collect()

    def _collect(self) -> RunResult:
        metrics = self.metrics
        metrics.transfers_attempted = len(self.log.of_kind("transfer_attempted"))

        in_flight = sum(1 for p in self._transfer_processes if p.is_alive)
        for result in self.transfers:
            if result.error is not None or isinstance(result.outcome, Denied):
                metrics.deny(result.label)

        for vasp_id in sorted(self.nodes):
            node = self.nodes[vasp_id]
            for record in node.records:
                if record.role is not Role.ORIGINATOR_SIDE or record.chain_tx_id is None:
                    continue
                if record.status is RecordStatus.CONFIRMED:
                    metrics.transfers_confirmed += 1
                elif record.status is RecordStatus.FAILED:
                    metrics.transfers_failed += 1
                elif record.status is RecordStatus.PENDING_CHAIN:
                    in_flight += 1
            metrics.resolution_attempts += node.resolution_attempts
            metrics.resolution_successes += node.resolution_successes
            metrics.resolution_hops += node.resolution_hops
            metrics.advertisements_accepted += node.advertisements_accepted
            metrics.advertisements_dropped += node.advertisements_dropped
        metrics.transfers_in_flight = in_flight
        metrics.gossip_convergence_tick = self._converged_since
        metrics.messages_sent = self.bus.sent
        metrics.messages_dropped = self.bus.dropped

        audits = [self.nodes[v].audit_travel_rule() for v in sorted(self.nodes)]
        reconciliations = [self.nodes[v].reconcile() for v in sorted(self.nodes)]
        metrics.audit_violations = sum(len(a.violations) for a in audits)
        metrics.reconciliation_orphans = sum(len(r.orphan_chain_txs) for r in reconciliations)
        metrics.unconfirmed_records = sum(len(r.unconfirmed_records) for r in reconciliations)

        breaches = run_all(self.log, self.ledger, metrics, self.nodes)
        for breach in breaches:
            logger.error("invariant breach", detail=breach)
        logger.info("simulation finished", digest=self.log.hex_digest, events=len(self.log),
                    confirmed=metrics.transfers_confirmed, denied=metrics.transfers_denied)

        return RunResult(
            scenario=self.scenario,
            log=self.log,
            metrics=metrics,
            ledger=self.ledger,
            nodes=self.nodes,
            cas=self.cas,
            registry=self.registry,
            transfers=list(self.transfers),
            audits=audits,
            reconciliations=reconciliations,
            breaches=breaches,
        )


def run_scenario(scenario: Scenario, seed: Optional[int] = None) -> RunResult:
    """
    Run a scenario to completion

    Args:
        scenario: Validated scenario
        seed: Overrides the scenario seed

    Returns:
        RunResult
    """
    if seed is not None:
        scenario = scenario.with_seed(seed)
    return Simulation(scenario).run()


def run(scenario: Scenario, seed: Optional[int] = None) -> Tuple[EventLog, Metrics]:
    result = run_scenario(scenario, seed)
    return result.log, result.metrics
