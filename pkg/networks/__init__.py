"""
Trust networks package - rules, directories, path-vector reachability, membership
File: networks/__init__.py
"""

from .operating_rules import OperatingRules
from .directory import DirectoryDelta, DirectoryPublisher, DirectorySnapshot, DirectoryView
from .path_vector import PeeringLink, ReachabilityAdvertisement, RouteTable, process_advertisement
from .trust_network import MemberRecord, TrustNetwork, TrustNetworkRegistry

__all__ = [
    'OperatingRules',
    'DirectoryDelta',
    'DirectoryPublisher',
    'DirectorySnapshot',
    'DirectoryView',
    'PeeringLink',
    'ReachabilityAdvertisement',
    'RouteTable',
    'process_advertisement',
    'MemberRecord',
    'TrustNetwork',
    'TrustNetworkRegistry',
]
