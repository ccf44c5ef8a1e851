"""
Trust network membership, peering registry and the exchange helpers members run
File: networks/trust_network.py
"""
from dataclasses import dataclass, replace
from typing import Dict, Iterable, List, Mapping, Optional, Set, Tuple

from networks.operating_rules import OperatingRules
from networks.path_vector import PeeringLink, ReachabilityAdvertisement
from pki.certificates import Certificate, RevocationView, validate_certificate
from pki.crypto_core import KeyPair, sign
from utils.errors import MembershipDenied, RulesVersionMismatch
from utils.logging_utils import get_logger


@dataclass(frozen=True)
class MemberRecord:
    vasp_id: str
    vasp_certificate: Certificate
    network_id: str
    joined_at: int
    acked_rules_version: int


class TrustNetwork:
    """One membership group under a common set of operating rules"""

    def __init__(self, network_id: str, rules: Optional[OperatingRules] = None):
        self.network_id = network_id
        self.rules = rules or OperatingRules()
        self.members: Dict[str, MemberRecord] = {}

    def member_ids(self) -> List[str]:
        return sorted(self.members)

    def is_member(self, vasp_id: str) -> bool:
        return vasp_id in self.members

    def amend_rules(self, **changes) -> OperatingRules:
        """Publish a new rules version; members must re-acknowledge on their next join"""
        self.rules = replace(self.rules.with_overrides(changes), rules_version=self.rules.rules_version + 1)
        return self.rules


class TrustNetworkRegistry:
    """
    Networks, their members and the peering links between them

    The registry is populated during setup and read afterwards; members get
    their own copies of peer certificates, so no node mutates it mid-run.

    Args:
        trust_anchors: Root certificates recognised by every network
    """

    def __init__(self, trust_anchors: Iterable[Certificate]):
        self.trust_anchors: List[Certificate] = list(trust_anchors)
        self.networks: Dict[str, TrustNetwork] = {}
        self.links: List[PeeringLink] = []
        self._logger = get_logger("trust_network")

    def add_network(self, network_id: str, rules: Optional[OperatingRules] = None) -> TrustNetwork:
        if network_id in self.networks:
            raise ValueError(f"network {network_id} already exists")
        network = TrustNetwork(network_id, rules)
        self.networks[network_id] = network
        return network

    def join_network(
        self,
        vasp_certificate: Certificate,
        network_id: str,
        rules_version_ack: int,
        now: int = 0,
        revocations: Optional[RevocationView] = None,
    ) -> MemberRecord:
        """
        Admit a VASP to a network

        Args:
            vasp_certificate: The VASP's own certificate (its network identity)
            network_id: Network to join
            rules_version_ack: Rules version the VASP signed up to
            now: Current tick
            revocations: Revocations the network knows about

        Returns:
            MemberRecord

        Raises:
            MembershipDenied: Certificate does not validate, or unknown network
            RulesVersionMismatch: Acknowledged rules version is not the current one
        """
        network = self.networks.get(network_id)
        if network is None:
            raise MembershipDenied(f"unknown network {network_id}")

        result = validate_certificate(
            vasp_certificate,
            self.trust_anchors,
            now,
            revocations=revocations,
            minimum_class=network.rules.minimum_certificate_class,
        )
        if not result.ok:
            raise MembershipDenied(f"{vasp_certificate.subject_id}: {result}")

        if rules_version_ack != network.rules.rules_version:
            raise RulesVersionMismatch(
                f"{vasp_certificate.subject_id} acked v{rules_version_ack}, "
                f"{network_id} is at v{network.rules.rules_version}"
            )

        record = MemberRecord(
            vasp_id=vasp_certificate.subject_id,
            vasp_certificate=vasp_certificate,
            network_id=network_id,
            joined_at=now,
            acked_rules_version=rules_version_ack,
        )
        network.members[record.vasp_id] = record
        self._logger.info("member joined", network=network_id, vasp=record.vasp_id)
        return record

    def add_peering_link(self, link: PeeringLink) -> PeeringLink:
        """Register a link; both gateways must already be members of their side"""
        for vasp_id, network_id in ((link.gateway_vasp_a, link.network_a), (link.gateway_vasp_b, link.network_b)):
            network = self.networks.get(network_id)
            if network is None or not network.is_member(vasp_id):
                raise MembershipDenied(f"{vasp_id} is not a member of {network_id}")
        self.links.append(link)
        return link

    def networks_of(self, vasp_id: str) -> List[str]:
        return sorted(n for n, network in self.networks.items() if network.is_member(vasp_id))

    def links_of(self, vasp_id: str) -> List[PeeringLink]:
        return [link for link in self.links if link.involves(vasp_id)]

    def gateways_of(self, network_id: str) -> List[str]:
        gateways: Set[str] = set()
        for link in self.links:
            if link.network_a == network_id:
                gateways.add(link.gateway_vasp_a)
            if link.network_b == network_id:
                gateways.add(link.gateway_vasp_b)
        return sorted(gateways)

    def peers_of(self, vasp_id: str) -> Dict[str, Certificate]:
        """Certificates of every VASP sharing a network with vasp_id, or linked to it"""
        peers: Dict[str, Certificate] = {}
        for network_id in self.networks_of(vasp_id):
            for member in self.networks[network_id].members.values():
                peers[member.vasp_id] = member.vasp_certificate
        for link in self.links_of(vasp_id):
            remote, remote_network = link.remote_end(vasp_id)
            peers[remote] = self.networks[remote_network].members[remote].vasp_certificate
        peers.pop(vasp_id, None)
        return peers

    def diameter(self) -> int:
        """Longest shortest path (in links) between networks of the peering graph"""
        adjacency: Dict[str, Set[str]] = {n: set() for n in self.networks}
        for link in self.links:
            adjacency[link.network_a].add(link.network_b)
            adjacency[link.network_b].add(link.network_a)

        longest = 0
        for start in adjacency:
            seen = {start: 0}
            frontier = [start]
            while frontier:
                nxt = []
                for node in frontier:
                    for neighbour in sorted(adjacency[node]):
                        if neighbour not in seen:
                            seen[neighbour] = seen[node] + 1
                            nxt.append(neighbour)
                frontier = nxt
            longest = max(longest, max(seen.values()))
        return longest


def exchange_crl(
    view_a: RevocationView,
    view_b: RevocationView,
    anchors: Mapping[str, Certificate],
) -> Tuple[bool, bool]:
    """
    Two-way CRL exchange: each side merges what the other exported

    Per issuer, the higher crl_number wins; stale lists are ignored.

    Returns:
        (a changed, b changed)
    """
    exported_a = view_a.export()
    exported_b = view_b.export()
    return view_a.merge(exported_b, dict(anchors)), view_b.merge(exported_a, dict(anchors))


def advertise_reachability(
    key_hashes: Iterable[bytes],
    gateway_id: str,
    gateway_keypair: KeyPair,
    network_id: str,
) -> ReachabilityAdvertisement:
    """
    Originate a signed advertisement summarising a network's directory

    Args:
        key_hashes: Union of the network's member snapshots
        gateway_id: Advertising (and home) gateway
        gateway_keypair: Gateway's VASP key
        network_id: Origin network

    Returns:
        Advertisement with path [network_id]
    """
    unsigned = ReachabilityAdvertisement(
        advertised_hashes=frozenset(bytes(h) for h in key_hashes),
        home_vasp_id=gateway_id,
        origin_network_id=network_id,
        network_path=(network_id,),
        advertising_gateway_id=gateway_id,
    )
    return sign_advertisement(unsigned, gateway_keypair)


def sign_advertisement(adv: ReachabilityAdvertisement, keypair: KeyPair) -> ReachabilityAdvertisement:
    return replace(adv, advertising_gateway_signature=sign(keypair.private_key, adv.tbs_bytes()))
