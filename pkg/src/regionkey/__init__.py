"""Region-based elliptic-curve group key agreement.

Subgroups agree on a regional key with a contributory multi-party ECDH
(:mod:`~regionkey.gecdh`); their gateways agree on an outer group key with a
binary key tree (:mod:`~regionkey.tgecdh`).  :mod:`~regionkey.region` ties the
two together, :mod:`~regionkey.message` encrypts payloads under either key,
and :mod:`~regionkey.simnet` and :mod:`~regionkey.p2p` simulate a small
information-sharing network on top.
"""

from .ec import E211, E751, TOY_31, CurveParams, Point, get_curve, scalar_mult
from .errors import RegionKeyError
from .gecdh import Member, SubgroupKeyState
from .message import Ciphertext, decrypt, encrypt
from .region import NodeProfile, Region, RegionConfig, form_subgroups
from .simnet import Network, run_scenario
from .tgecdh import OuterGroupState

__all__ = [
    "E211", "E751", "TOY_31", "CurveParams", "Point", "get_curve", "scalar_mult",
    "RegionKeyError", "Member", "SubgroupKeyState", "Ciphertext", "decrypt", "encrypt",
    "NodeProfile", "Region", "RegionConfig", "form_subgroups", "Network", "run_scenario",
    "OuterGroupState",
]
__version__ = "0.1.0"
