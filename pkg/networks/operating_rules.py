"""
Machine-checkable operating rules of a trust network
File: networks/operating_rules.py
"""
from dataclasses import dataclass, fields, replace
from typing import Any, Mapping

from pki.assertion_service import TRAVEL_RULE_POLICY, DisclosurePolicy
from pki.certificates import CertificateClass


@dataclass(frozen=True)
class OperatingRules:
    rules_version: int = 1
    minimum_certificate_class: CertificateClass = CertificateClass.CLASS1
    required_disclosure_policy: DisclosurePolicy = TRAVEL_RULE_POLICY
    directory_sync_period: int = 10
    crl_exchange_period: int = 20
    ack_timeout: int = 10

    def __post_init__(self):
        for name in ("directory_sync_period", "crl_exchange_period", "ack_timeout"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    def with_overrides(self, overrides: Mapping[str, Any]) -> "OperatingRules":
        """
        Apply scenario overrides

        Args:
            overrides: Field name -> value; the disclosure policy may be given
                as a list of attribute names and the class as 'ClassN' or N

        Returns:
            New OperatingRules
        """
        known = {f.name for f in fields(self)}
        values = {}
        for key, value in overrides.items():
            if key not in known:
                raise ValueError(f"unknown operating rule '{key}'")
            if key == "minimum_certificate_class":
                value = CertificateClass.parse(value)
            elif key == "required_disclosure_policy" and not isinstance(value, DisclosurePolicy):
                value = DisclosurePolicy(frozenset(value))
            values[key] = value
        return replace(self, **values)
