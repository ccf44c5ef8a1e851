"""
Shared fixtures
File: tests/conftest.py
"""
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import pytest

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from pki.certificate_authority import CertificateAuthority, Validity
from pki.certificates import VASP_PROFILE, CertificateClass
from pki.crypto_core import KeyPair, generate_keypair
from utils.id_utils import derive_rng, derive_seed
from utils.logging_utils import configure_logging

configure_logging("ERROR")

FULL_ATTRIBUTES = {
    "name": "Alice Example",
    "email": "alice@mail.example",
    "government_id": "P1234567",
    "address": "1 Example Street",
}


def make_keypair(*labels: str) -> KeyPair:
    return generate_keypair(derive_seed(1, "test", *labels))


def make_ca(ca_id: str = "ca1") -> CertificateAuthority:
    return CertificateAuthority(ca_id, make_keypair("ca", ca_id), derive_rng(1, "serials", ca_id))


def certify_vasp(ca: CertificateAuthority, vasp_id: str, keypair: KeyPair):
    attributes = dict(FULL_ATTRIBUTES, name=vasp_id, organization_vetting_ref=f"vet-{vasp_id}", vasp_id=vasp_id)
    registration = ca.register_subject(vasp_id, attributes, CertificateClass.CLASS3)
    return ca.issue_certificate(registration, keypair.public_key, VASP_PROFILE, Validity(0, 1_000_000))


def customer(customer_id: str, vasp: str, **extra: Any) -> Dict[str, Any]:
    spec = {
        "customer_id": customer_id,
        "vasp": vasp,
        "attributes": {"name": customer_id.title(), "email": f"{customer_id}@mail.example"},
    }
    spec.update(extra)
    return spec


def single_network(
    customers: List[Dict[str, Any]],
    script: Optional[List[Dict[str, Any]]] = None,
    vasps: int = 2,
    seed: int = 3,
    **settings: Any,
) -> Dict[str, Any]:
    """Scenario document: one network n1 with CA ca1 and VASPs v1..vN"""
    return {
        "seed": seed,
        "settings": dict({"drain_ticks": 40}, **settings),
        "networks": [{"network_id": "n1"}],
        "cas": [{"ca_id": "ca1"}],
        "vasps": [{"vasp_id": f"v{i + 1}", "networks": ["n1"], "ca": "ca1"} for i in range(vasps)],
        "customers": customers,
        "script": script or [],
    }


@pytest.fixture
def ca() -> CertificateAuthority:
    return make_ca()


@pytest.fixture
def subject_key() -> KeyPair:
    return make_keypair("subject")
