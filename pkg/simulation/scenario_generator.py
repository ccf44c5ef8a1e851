"""
Seeded scenario builders: the default two-network world, random topologies, a four-network cycle
File: simulation/scenario_generator.py
"""
import random
from typing import Any, Dict, List, Optional, Sequence, Tuple

from simulation.scenario import Scenario, parse_scenario
from utils.id_utils import derive_rng
from vasps.accounts import CustodyModel

CUSTODY_WEIGHTS: Tuple[Tuple[CustodyModel, float], ...] = (
    (CustodyModel.MEDIATED, 0.5),
    (CustodyModel.KEY_CUSTODY, 0.3),
    (CustodyModel.COMMINGLED, 0.2),
)


def _customer(rng: random.Random, customer_id: str, vasp_id: str, custody: CustodyModel) -> Dict[str, Any]:
    attributes = {"name": f"Customer {customer_id}", "email": f"{customer_id}@mail.example"}
    requested = "Class1"
    if rng.random() < 0.5:
        attributes["government_id"] = f"id-{rng.getrandbits(32):08x}"
        attributes["address"] = f"{rng.randint(1, 999)} Example Street"
        requested = "Class2"
    return {
        "customer_id": customer_id,
        "vasp": vasp_id,
        "attributes": attributes,
        "custody": custody.value,
        "requested_class": requested,
    }


def _target(rng: random.Random, customer: Dict[str, Any]) -> Dict[str, Any]:
    if customer["custody"] == CustodyModel.COMMINGLED.value:
        form = "account"
    else:
        form = rng.choice(["key", "hash", "account"])
    return {"customer": customer["customer_id"], "form": form}


def _world(
    rng: random.Random,
    layout: Sequence[Tuple[str, Sequence[str]]],
    links: Sequence[Tuple[str, str, str, str]],
    customers_per_vasp: int,
    custody: Optional[CustodyModel] = None,
) -> Dict[str, Any]:
    """
    Networks, one CA per network, VASPs, links and customers

    Args:
        layout: (network id, its VASP ids)
        links: (gateway_a, network_a, gateway_b, network_b)
        customers_per_vasp: Customers opened at every VASP
        custody: Force one custody model instead of the weighted mix
    """
    models = [m for m, _ in CUSTODY_WEIGHTS]
    weights = [w for _, w in CUSTODY_WEIGHTS]
    document: Dict[str, Any] = {
        "networks": [{"network_id": network_id} for network_id, _ in layout],
        "cas": [{"ca_id": f"ca-{network_id}"} for network_id, _ in layout],
        "vasps": [],
        "peering_links": [
            {"gateway_a": a, "network_a": na, "gateway_b": b, "network_b": nb} for a, na, b, nb in links
        ],
        "customers": [],
    }
    for network_id, vasp_ids in layout:
        for vasp_id in vasp_ids:
            document["vasps"].append({"vasp_id": vasp_id, "networks": [network_id], "ca": f"ca-{network_id}"})
            for index in range(customers_per_vasp):
                model = custody or rng.choices(models, weights)[0]
                document["customers"].append(_customer(rng, f"{vasp_id}-c{index:02d}", vasp_id, model))
    return document


def generate_scenario(
    seed: int,
    networks: int = 2,
    vasps_per_network: int = 3,
    customers: int = 60,
    transfers: int = 200,
    batches: int = 10,
    p2p: int = 20,
    wallets: int = 10,
    start_tick: int = 40,
    drain_ticks: int = 120,
) -> Scenario:
    """
    The default honest world: networks in a chain, random transfers between customers

    Transfers start once routes have settled, one per tick; batches count
    toward the transfer total. P2P noise moves value between wallets no
    VASP knows.

    Args:
        seed: Scenario seed (also drives the generator)
        networks: Number of networks, linked last-VASP to first-VASP in a chain
        vasps_per_network: Members per network
        customers: Customers spread round-robin over the VASPs
        transfers: Scripted transfers, batches included
        batches: Commingled batches among them (skipped if no VASP has two commingled customers)
        p2p: Wallet-to-wallet transactions
        wallets: Wallets outside any VASP
        start_tick: First transfer tick
        drain_ticks: Ticks after the last action

    Returns:
        Validated Scenario
    """
    rng = derive_rng(seed, "generator")
    layout = [
        (f"n{n + 1}", [f"v{n * vasps_per_network + i + 1}" for i in range(vasps_per_network)])
        for n in range(networks)
    ]
    links = [
        (layout[n][1][-1], layout[n][0], layout[n + 1][1][0], layout[n + 1][0])
        for n in range(networks - 1)
    ]
    per_vasp = max(1, customers // (networks * vasps_per_network))
    document = _world(rng, layout, links, per_vasp)
    people = document["customers"]

    by_vasp: Dict[str, List[Dict[str, Any]]] = {}
    for person in people:
        by_vasp.setdefault(person["vasp"], []).append(person)
    batch_homes = sorted(
        vasp_id for vasp_id, members in by_vasp.items()
        if sum(m["custody"] == CustodyModel.COMMINGLED.value for m in members) >= 2
    )
    if not batch_homes:
        batches = 0

    timed: List[Tuple[int, int, Dict[str, Any]]] = []
    batch_slots = set(rng.sample(range(transfers), min(batches, transfers)))
    for index in range(transfers):
        tick = start_tick + index
        if index in batch_slots:
            timed.append((tick, index, _batch(rng, by_vasp, batch_homes)))
            continue
        origin = rng.choice(people)
        target = rng.choice([p for p in people if p is not origin])
        timed.append((tick, index, {
            "action": "transfer",
            "origin": origin["customer_id"],
            "target": _target(rng, target),
            "amount": rng.randint(1, 1000),
        }))

    wallet_ids = [f"w{i + 1}" for i in range(wallets)]
    if len(wallet_ids) >= 2:
        for index in range(p2p):
            sender, recipient = rng.sample(wallet_ids, 2)
            timed.append((start_tick + rng.randrange(max(1, transfers)), transfers + index, {
                "action": "p2p_transfer",
                "sender": sender,
                "recipient": recipient,
                "amount": rng.randint(1, 100),
            }))

    timed.sort(key=lambda item: (item[0], item[1]))
    script = [dict(action, tick=tick) for tick, _, action in timed]

    document.update({
        "seed": seed,
        "settings": {"drain_ticks": drain_ticks},
        "wallets": wallet_ids,
        "script": script,
    })
    return parse_scenario(document)


def _batch(rng: random.Random, by_vasp: Dict[str, List[Dict[str, Any]]], homes: List[str]) -> Dict[str, Any]:
    home = rng.choice(homes)
    commingled = [p for p in by_vasp[home] if p["custody"] == CustodyModel.COMMINGLED.value]
    origins = rng.sample(commingled, min(len(commingled), rng.randint(2, 3)))
    destination = rng.choice(sorted(by_vasp))
    candidates = [p for p in by_vasp[destination] if p not in origins]
    return {
        "action": "batch_transfer",
        "transfers": [
            {
                "origin": origin["customer_id"],
                "target": _target(rng, rng.choice(candidates)),
                "amount": rng.randint(1, 500),
            }
            for origin in origins
        ],
    }


def random_topology(seed: int, min_vasps: int = 3, max_vasps: int = 12, customers_per_vasp: int = 2) -> Scenario:
    """
    A random single- or multi-network world without transfers, for gossip convergence runs

    Every customer is enrolled at tick 0, so directory content changes only
    at the first publication.
    """
    rng = derive_rng(seed, "topology")
    total = rng.randint(min_vasps, max_vasps)
    network_count = rng.randint(1, max(1, min(3, total // 2)))
    vasp_ids = [f"v{i + 1}" for i in range(total)]

    layout: List[Tuple[str, List[str]]] = [(f"n{n + 1}", []) for n in range(network_count)]
    for index, vasp_id in enumerate(vasp_ids):
        layout[index % network_count][1].append(vasp_id)
    links = [
        (layout[n][1][-1], layout[n][0], layout[n + 1][1][0], layout[n + 1][0])
        for n in range(network_count - 1)
    ]

    document = _world(rng, layout, links, customers_per_vasp)
    document.update({"seed": seed, "settings": {"drain_ticks": 60}, "script": []})
    return parse_scenario(document)


def cycle_topology(seed: int, transfer_tick: int = 80) -> Scenario:
    """
    Four networks a, b, c, d peered as a-b, a-c, b-d, c-d, each with three members

    The script sends one transfer from a non-gateway member of network a to
    a key held in network d, which has two equal-length paths.
    """
    rng = derive_rng(seed, "cycle")
    layout = [(f"n{name}", [f"{name}{i}" for i in (1, 2, 3)]) for name in "abcd"]
    links = [
        ("a2", "na", "b1", "nb"),
        ("a3", "na", "c1", "nc"),
        ("b3", "nb", "d1", "nd"),
        ("c3", "nc", "d2", "nd"),
    ]
    document = _world(rng, layout, links, 2, custody=CustodyModel.MEDIATED)
    document.update({
        "seed": seed,
        "settings": {"drain_ticks": 60},
        "script": [{
            "action": "transfer",
            "tick": transfer_tick,
            "origin": "a1-c00",
            "target": {"customer": "d3-c00", "form": "key"},
            "amount": 10,
        }],
    })
    return parse_scenario(document)
