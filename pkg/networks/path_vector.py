"""
Cross-network reachability: peering links, advertisements, route selection
File: networks/path_vector.py

Advertisements carry public-key hashes only, never serials or attributes.
A route is preferred by shortest network path, then lexicographically
smaller origin network id.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Dict, FrozenSet, List, Optional, Tuple, Union

from pki.certificates import Certificate
from pki.crypto_core import canonical_encode, encode_sequence, text, verify
from utils.id_utils import short_hash


@dataclass(frozen=True)
class PeeringLink:
    gateway_vasp_a: str
    network_a: str
    gateway_vasp_b: str
    network_b: str
    established_at: int = 0

    def __post_init__(self):
        if self.network_a == self.network_b:
            raise ValueError("peering gateways must sit in different networks")

    @property
    def link_id(self) -> str:
        return f"{self.gateway_vasp_a}@{self.network_a}<->{self.gateway_vasp_b}@{self.network_b}"

    def involves(self, vasp_id: str) -> bool:
        return vasp_id in (self.gateway_vasp_a, self.gateway_vasp_b)

    def local_network(self, vasp_id: str) -> str:
        return self.network_a if vasp_id == self.gateway_vasp_a else self.network_b

    def remote_end(self, vasp_id: str) -> Tuple[str, str]:
        """(remote gateway, remote network) as seen from vasp_id"""
        if vasp_id == self.gateway_vasp_a:
            return self.gateway_vasp_b, self.network_b
        return self.gateway_vasp_a, self.network_a


@dataclass(frozen=True)
class ReachabilityAdvertisement:
    advertised_hashes: FrozenSet[bytes]
    home_vasp_id: str
    origin_network_id: str
    network_path: Tuple[str, ...]
    advertising_gateway_id: str
    advertising_gateway_signature: bytes = b""

    def __post_init__(self):
        if not self.network_path or self.network_path[0] != self.origin_network_id:
            raise ValueError("network path must start at the origin network")
        if len(set(self.network_path)) != len(self.network_path):
            raise ValueError(f"repeated network in path {self.network_path}")

    def tbs_bytes(self) -> bytes:
        return canonical_encode([
            (1, encode_sequence(sorted(self.advertised_hashes))),
            (2, text(self.home_vasp_id)),
            (3, text(self.origin_network_id)),
            (4, encode_sequence(text(n) for n in self.network_path)),
            (5, text(self.advertising_gateway_id)),
        ])


@dataclass(frozen=True)
class Route:
    hashes: FrozenSet[bytes]
    home_vasp_id: str
    origin_network_id: str
    network_path: Tuple[str, ...]
    next_hop: str
    via_relay: bool = False

    def preference(self) -> Tuple:
        return (len(self.network_path), self.origin_network_id, self.via_relay, self.network_path, self.next_hop)


class DropReason(str, Enum):
    LOOP = "loop"
    NOT_A_PEER = "not-a-peer"
    BAD_SIGNATURE = "bad-signature"


@dataclass(frozen=True)
class Accept:
    route: Route
    changed: bool


@dataclass(frozen=True)
class Drop:
    reason: DropReason


class RouteTable:
    """Candidate routes keyed by (origin network, next hop); best chosen per hash"""

    def __init__(self):
        self._candidates: Dict[Tuple[str, str], Route] = {}

    def install(self, route: Route) -> bool:
        """Install or refresh a candidate; True if the table changed"""
        assert len(set(route.network_path)) == len(route.network_path), route.network_path
        key = (route.origin_network_id, route.next_hop)
        if self._candidates.get(key) == route:
            return False
        self._candidates[key] = route
        return True

    def best_route(self, public_key_hash: bytes, direct_only: bool = False) -> Optional[Route]:
        """
        Preferred route for a hash

        Args:
            public_key_hash: Key hash to reach
            direct_only: Ignore routes relayed by other gateways of this network
                (used for queries that were themselves relayed, so they never bounce)
        """
        matches = [
            r for r in self._candidates.values()
            if bytes(public_key_hash) in r.hashes and not (direct_only and r.via_relay)
        ]
        if not matches:
            return None
        return min(matches, key=Route.preference)

    def routes(self) -> List[Route]:
        return sorted(self._candidates.values(), key=Route.preference)

    def best_per_origin(self, direct_only: bool = False) -> List[Route]:
        """The preferred candidate for each origin network; only these are re-advertised"""
        best: Dict[str, Route] = {}
        for route in self.routes():
            if direct_only and route.via_relay:
                continue
            best.setdefault(route.origin_network_id, route)
        return [best[origin] for origin in sorted(best)]

    def all_hashes(self) -> FrozenSet[bytes]:
        hashes = set()
        for route in self._candidates.values():
            hashes |= route.hashes
        return frozenset(hashes)

    def dump_lines(self) -> List[str]:
        """hash_prefix,home_vasp,path for the best route of every known hash"""
        lines = []
        for key_hash in sorted(self.all_hashes()):
            route = self.best_route(key_hash)
            lines.append(f"{short_hash(key_hash)},{route.home_vasp_id},{'>'.join(route.network_path)}")
        return lines


AdvertisementOutcome = Union[Accept, Drop]


def process_advertisement(
    table: RouteTable,
    receiving_network_id: str,
    adv: ReachabilityAdvertisement,
    link: PeeringLink,
    receiving_gateway_id: str,
    sender_certificate: Optional[Certificate],
) -> AdvertisementOutcome:
    """
    Validate and install an advertisement received across a peering link

    Args:
        table: Receiving gateway's route table
        receiving_network_id: Network the receiving gateway sits in
        adv: Incoming advertisement
        link: Peering link it arrived on
        receiving_gateway_id: Local end of the link
        sender_certificate: Certificate of the remote gateway

    Returns:
        Accept(route, changed) or Drop(reason)
    """
    remote_gateway, _ = link.remote_end(receiving_gateway_id)
    if adv.advertising_gateway_id != remote_gateway or sender_certificate is None \
            or sender_certificate.subject_id != remote_gateway:
        return Drop(DropReason.NOT_A_PEER)

    if not verify(sender_certificate.subject_public_key, adv.tbs_bytes(), adv.advertising_gateway_signature):
        return Drop(DropReason.BAD_SIGNATURE)

    if receiving_network_id in adv.network_path:
        return Drop(DropReason.LOOP)

    route = Route(
        hashes=frozenset(adv.advertised_hashes),
        home_vasp_id=adv.home_vasp_id,
        origin_network_id=adv.origin_network_id,
        network_path=tuple(adv.network_path),
        next_hop=remote_gateway,
    )
    return Accept(route=route, changed=table.install(route))


def install_relayed(table: RouteTable, route: Route, relaying_gateway_id: str) -> bool:
    """Install a route learned by another gateway of the same network"""
    return table.install(Route(
        hashes=route.hashes,
        home_vasp_id=route.home_vasp_id,
        origin_network_id=route.origin_network_id,
        network_path=route.network_path,
        next_hop=relaying_gateway_id,
        via_relay=True,
    ))
