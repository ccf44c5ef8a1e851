"""
Scenario schema, loading and reference checks
File: simulation/scenario.py

A scenario is a JSON document:

    {
      "seed": 7,
      "settings": {"max_latency": 3, "drop_probability": 0.0, ...},
      "networks": [{"network_id": "n1", "rules": {"ack_timeout": 10}}],
      "cas": [{"ca_id": "ca1"}],
      "vasps": [{"vasp_id": "v1", "networks": ["n1"], "ca": "ca1"}],
      "peering_links": [{"gateway_a": "v1", "network_a": "n1", "gateway_b": "v4", "network_b": "n2"}],
      "customers": [{"customer_id": "alice", "vasp": "v1", "attributes": {"name": "Alice", "email": "a@x"}}],
      "wallets": ["w1", "w2"],
      "suspects": [{"entry": "mallory-account", "vasps": ["v2"]}],
      "script": [
        {"action": "transfer", "tick": 40, "origin": "alice", "target": {"customer": "bob"}, "amount": 5},
        {"action": "advance", "ticks": 10}
      ]
    }

Script actions without a tick run at the cursor; "advance" moves the
cursor and explicit ticks may never move it backwards.
"""
import json
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Set, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from networks.operating_rules import OperatingRules
from pki.certificates import CertificateClass, RevocationReason
from utils.errors import SchemaError
from utils.file_utils import load_json
from utils.id_utils import is_valid_id
from vasps.accounts import CustodyModel


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SimulationSettings(_Model):
    max_latency: int = Field(default=3, ge=1)
    drop_probability: float = Field(default=0.0, ge=0.0, le=1.0)
    confirmation_delay: int = Field(default=3, ge=0)
    drain_ticks: int = Field(default=120, ge=0)
    chain_id: str = "simchain"


class NetworkSpec(_Model):
    network_id: str
    rules: Dict[str, Any] = Field(default_factory=dict)


class CaSpec(_Model):
    ca_id: str
    class_table: Optional[Dict[str, List[str]]] = None
    permitted_chains: List[str] = Field(default_factory=list)


class VaspSpec(_Model):
    vasp_id: str
    networks: List[str] = Field(default_factory=list)
    ca: str
    default_custody: CustodyModel = CustodyModel.MEDIATED
    attributes: Dict[str, str] = Field(default_factory=dict)
    supported_assets: Optional[List[str]] = None


class PeeringSpec(_Model):
    gateway_a: str
    network_a: str
    gateway_b: str
    network_b: str
    established_at: int = Field(default=0, ge=0)


class CustomerSpec(_Model):
    customer_id: str
    vasp: str
    attributes: Dict[str, str] = Field(default_factory=dict)
    custody: Optional[CustodyModel] = None
    requested_class: str = "Class1"
    auto_open: bool = True
    auto_enroll: bool = True


class SuspectSpec(_Model):
    entry: str
    vasps: Optional[List[str]] = None


class TargetSpec(_Model):
    """A customer (by key, key hash or account), or a raw key / hash / account"""
    customer: Optional[str] = None
    form: Literal["key", "hash", "account"] = "key"
    public_key: Optional[str] = None
    key_hash: Optional[str] = None
    vasp: Optional[str] = None
    account: Optional[str] = None

    @model_validator(mode="after")
    def _one_form(self):
        given = [self.customer is not None, self.public_key is not None,
                 self.key_hash is not None, self.account is not None]
        if sum(given) != 1:
            raise ValueError("target names exactly one of customer, public_key, key_hash, account")
        if self.account is not None and self.vasp is None:
            raise ValueError("account targets need a vasp")
        return self


class _Action(_Model):
    tick: Optional[int] = Field(default=None, ge=0)


class OpenAccountAction(_Action):
    action: Literal["open_account"]
    customer: str


class EnrollAction(_Action):
    action: Literal["enroll"]
    customer: str


class TransferAction(_Action):
    action: Literal["transfer"]
    origin: str
    target: TargetSpec
    amount: int = Field(ge=1)
    asset_type: str = "VA"


class BatchItem(_Model):
    origin: str
    target: TargetSpec
    amount: int = Field(ge=1)


class BatchTransferAction(_Action):
    action: Literal["batch_transfer"]
    transfers: List[BatchItem] = Field(min_length=1)
    asset_type: str = "VA"


class P2PTransferAction(_Action):
    action: Literal["p2p_transfer"]
    sender: str
    recipient: str
    amount: int = Field(ge=1)
    asset_type: str = "VA"


class RevokeCertAction(_Action):
    action: Literal["revoke_cert"]
    customer: Optional[str] = None
    vasp: Optional[str] = None
    reason: RevocationReason = RevocationReason.KEY_COMPROMISE

    @model_validator(mode="after")
    def _one_subject(self):
        if (self.customer is None) == (self.vasp is None):
            raise ValueError("revoke_cert names exactly one of customer, vasp")
        return self


class DropLinkAction(_Action):
    action: Literal["drop_link"]
    endpoint_a: str
    endpoint_b: str
    duration: int = Field(ge=1)
    kinds: List[str] = Field(default_factory=list)


class AdvanceAction(_Action):
    action: Literal["advance"]
    ticks: int = Field(ge=1)


class TamperExecutionAction(_Action):
    action: Literal["tamper_execution"]
    vasp: str


ScriptAction = Annotated[
    Union[
        OpenAccountAction,
        EnrollAction,
        TransferAction,
        BatchTransferAction,
        P2PTransferAction,
        RevokeCertAction,
        DropLinkAction,
        AdvanceAction,
        TamperExecutionAction,
    ],
    Field(discriminator="action"),
]


class Scenario(_Model):
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    settings: SimulationSettings = Field(default_factory=SimulationSettings)
    networks: List[NetworkSpec] = Field(default_factory=list)
    cas: List[CaSpec] = Field(min_length=1)
    vasps: List[VaspSpec] = Field(min_length=1)
    peering_links: List[PeeringSpec] = Field(default_factory=list)
    customers: List[CustomerSpec] = Field(default_factory=list)
    wallets: List[str] = Field(default_factory=list)
    suspects: List[SuspectSpec] = Field(default_factory=list)
    script: List[ScriptAction] = Field(default_factory=list)

    def with_seed(self, seed: int) -> "Scenario":
        return self.model_copy(update={"seed": seed})

    def customer(self, customer_id: str) -> CustomerSpec:
        for spec in self.customers:
            if spec.customer_id == customer_id:
                return spec
        raise KeyError(customer_id)

    def custody_of(self, customer_id: str) -> CustodyModel:
        spec = self.customer(customer_id)
        if spec.custody is not None:
            return spec.custody
        return next(v.default_custody for v in self.vasps if v.vasp_id == spec.vasp)

    def timeline(self) -> List[Tuple[int, Any]]:
        """(tick, action) pairs; advance actions are consumed into the cursor"""
        cursor = 0
        scheduled = []
        for action in self.script:
            if action.tick is not None:
                cursor = action.tick
            if isinstance(action, AdvanceAction):
                cursor += action.ticks
                continue
            scheduled.append((cursor, action))
        return scheduled

    @property
    def end_tick(self) -> int:
        cursor = 0
        for action in self.script:
            if action.tick is not None:
                cursor = action.tick
            if isinstance(action, AdvanceAction):
                cursor += action.ticks
        return cursor + self.settings.drain_ticks

    def to_dict(self) -> Dict[str, Any]:
        return self.model_dump(mode="json", exclude_none=True)


def _fail(message: str, reference: str):
    raise SchemaError(message, reference=reference)


def _check_ids(kind: str, ids: List[str]) -> Set[str]:
    seen: Set[str] = set()
    for index, value in enumerate(ids):
        if not is_valid_id(value):
            _fail(f"invalid {kind} id '{value}'", f"{kind}s[{index}]")
        if value in seen:
            _fail(f"duplicate {kind} id '{value}'", f"{kind}s[{index}]")
        seen.add(value)
    return seen


def check_references(scenario: Scenario) -> Scenario:
    """
    Check that every id the scenario mentions is defined, and that ticks never go back

    Raises:
        SchemaError: Naming the offending reference
    """
    networks = _check_ids("network", [n.network_id for n in scenario.networks])
    cas = _check_ids("ca", [c.ca_id for c in scenario.cas])
    vasps = _check_ids("vasp", [v.vasp_id for v in scenario.vasps])
    customers = _check_ids("customer", [c.customer_id for c in scenario.customers])
    wallets = _check_ids("wallet", list(scenario.wallets))

    clashes = (networks | cas | vasps) & (customers | wallets) or (networks & cas) or (cas & vasps) \
        or (networks & vasps) or (customers & wallets)
    if clashes:
        _fail(f"ids used twice: {sorted(clashes)}", sorted(clashes)[0])

    for index, network in enumerate(scenario.networks):
        try:
            OperatingRules().with_overrides(network.rules)
        except (ValueError, TypeError) as e:
            _fail(str(e), f"networks[{index}].rules")

    for index, ca in enumerate(scenario.cas):
        for level in (ca.class_table or {}):
            try:
                CertificateClass.parse(level)
            except ValueError:
                _fail(f"unknown certificate class '{level}'", f"cas[{index}].class_table.{level}")

    for index, vasp in enumerate(scenario.vasps):
        if vasp.ca not in cas:
            _fail(f"unknown ca '{vasp.ca}'", f"vasps[{index}].ca")
        for network_id in vasp.networks:
            if network_id not in networks:
                _fail(f"unknown network '{network_id}'", f"vasps[{index}].networks")

    memberships = {v.vasp_id: set(v.networks) for v in scenario.vasps}
    for index, link in enumerate(scenario.peering_links):
        for gateway, network_id in ((link.gateway_a, link.network_a), (link.gateway_b, link.network_b)):
            if gateway not in vasps:
                _fail(f"unknown vasp '{gateway}'", f"peering_links[{index}]")
            if network_id not in memberships[gateway]:
                _fail(f"{gateway} is not a member of '{network_id}'", f"peering_links[{index}]")
        if link.network_a == link.network_b:
            _fail("a link joins two different networks", f"peering_links[{index}]")

    for index, customer in enumerate(scenario.customers):
        if customer.vasp not in vasps:
            _fail(f"unknown vasp '{customer.vasp}'", f"customers[{index}].vasp")
        try:
            CertificateClass.parse(customer.requested_class)
        except ValueError:
            _fail(f"unknown certificate class '{customer.requested_class}'", f"customers[{index}].requested_class")

    for index, suspect in enumerate(scenario.suspects):
        for vasp_id in suspect.vasps or []:
            if vasp_id not in vasps:
                _fail(f"unknown vasp '{vasp_id}'", f"suspects[{index}].vasps")

    parties = customers | wallets
    cursor = 0
    for index, action in enumerate(scenario.script):
        ref = f"script[{index}]"
        if action.tick is not None:
            if action.tick < cursor:
                _fail(f"tick {action.tick} is before {cursor}", f"{ref}.tick")
            cursor = action.tick
        if isinstance(action, AdvanceAction):
            cursor += action.ticks

        if isinstance(action, (OpenAccountAction, EnrollAction)):
            if action.customer not in customers:
                _fail(f"unknown customer '{action.customer}'", f"{ref}.customer")
        elif isinstance(action, TransferAction):
            _check_party(scenario, action.origin, customers, f"{ref}.origin")
            _check_target(scenario, action.target, customers, vasps, f"{ref}.target")
        elif isinstance(action, BatchTransferAction):
            for item_index, item in enumerate(action.transfers):
                item_ref = f"{ref}.transfers[{item_index}]"
                _check_party(scenario, item.origin, customers, f"{item_ref}.origin")
                _check_target(scenario, item.target, customers, vasps, f"{item_ref}.target")
                if scenario.custody_of(item.origin) is not CustodyModel.COMMINGLED:
                    _fail("batched transfers start from commingled accounts", f"{item_ref}.origin")
            homes = {scenario.customer(item.origin).vasp for item in action.transfers}
            if len(homes) != 1:
                _fail("a batch is sent by one VASP", f"{ref}.transfers")
        elif isinstance(action, P2PTransferAction):
            for name, party in (("sender", action.sender), ("recipient", action.recipient)):
                if party not in parties:
                    _fail(f"unknown party '{party}'", f"{ref}.{name}")
                if party in customers and scenario.custody_of(party) is CustodyModel.COMMINGLED:
                    _fail(f"commingled customer '{party}' has no own key", f"{ref}.{name}")
        elif isinstance(action, RevokeCertAction):
            if action.customer is not None and action.customer not in customers:
                _fail(f"unknown customer '{action.customer}'", f"{ref}.customer")
            if action.vasp is not None and action.vasp not in vasps:
                _fail(f"unknown vasp '{action.vasp}'", f"{ref}.vasp")
        elif isinstance(action, DropLinkAction):
            for name, endpoint in (("endpoint_a", action.endpoint_a), ("endpoint_b", action.endpoint_b)):
                if endpoint not in vasps | cas:
                    _fail(f"unknown endpoint '{endpoint}'", f"{ref}.{name}")
        elif isinstance(action, TamperExecutionAction):
            if action.vasp not in vasps:
                _fail(f"unknown vasp '{action.vasp}'", f"{ref}.vasp")

    return scenario


def _check_party(scenario: Scenario, customer_id: str, customers: Set[str], ref: str):
    if customer_id not in customers:
        _fail(f"unknown customer '{customer_id}'", ref)


def _check_target(scenario: Scenario, target: TargetSpec, customers: Set[str], vasps: Set[str], ref: str):
    if target.customer is not None:
        if target.customer not in customers:
            _fail(f"unknown customer '{target.customer}'", f"{ref}.customer")
        if target.form != "account" and scenario.custody_of(target.customer) is CustodyModel.COMMINGLED:
            _fail(f"commingled customer '{target.customer}' is reachable by account only", f"{ref}.form")
    if target.vasp is not None and target.vasp not in vasps:
        _fail(f"unknown vasp '{target.vasp}'", f"{ref}.vasp")
    for name in ("public_key", "key_hash"):
        value = getattr(target, name)
        if value is not None:
            try:
                raw = bytes.fromhex(value)
            except ValueError:
                _fail(f"{name} is not hex", f"{ref}.{name}")
            if len(raw) != 32:
                _fail(f"{name} must be 32 bytes", f"{ref}.{name}")


def parse_scenario(data: Any) -> Scenario:
    """
    Validate a decoded scenario document

    Raises:
        SchemaError: Shape errors (reference is the failing location) or dangling ids
    """
    try:
        scenario = Scenario.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first.get("loc", ()))
        raise SchemaError(f"{location}: {first.get('msg', 'invalid')}", reference=location or None) from e
    return check_references(scenario)


def load_scenario(path: Union[str, Path]) -> Scenario:
    """
    Load and validate a scenario file

    Args:
        path: JSON scenario path

    Returns:
        Validated Scenario

    Raises:
        SchemaError: Unreadable file, malformed JSON, schema or reference errors
    """
    try:
        data = load_json(path)
    except FileNotFoundError as e:
        raise SchemaError(str(e), reference=str(path)) from e
    except json.JSONDecodeError as e:
        raise SchemaError(f"malformed JSON: {e.msg}", reference=f"line {e.lineno}") from e
    return parse_scenario(data)
