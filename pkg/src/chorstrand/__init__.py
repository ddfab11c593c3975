"""Choreographies, strand spaces, and bounded faithfulness checking.

The package covers two execution models and the bridge between them:

- choreography level: a small interaction language with a labelled
  transition system and an abstract bundle semantics;
- cryptoprotocol level: strand spaces with a symbolic attacker and a
  bounded enumeration of complete protocol executions;
- the bridge: an abstraction map from concrete messages to interactions,
  and a mechanical check that a protocol implements a choreography
  faithfully within finite bounds.
"""

from importlib import resources

from .absem import (
    AgreementReport,
    BundleEnv,
    EndMarker,
    Interaction,
    bundle_semantics,
    check_step_agreement,
    env_label_sequence,
    prefix,
    unprefix,
    zero_env,
)
from .abstraction import (
    AbstractionMap,
    AmapError,
    apply_abstraction,
    bundle_image,
    load_abstraction_map,
    parse_abstraction_map,
    strand_image,
)
from .chor import (
    Box,
    Branch,
    ChorParseError,
    Com,
    Value,
    Zero,
    check_static_assumptions,
    chor_to_text,
    parse_choreography,
    roles_of,
)
from .faithful import (
    FaithfulnessReport,
    check_faithfulness,
    fingerprints_of,
    is_initial_subbundle,
    separate,
)
from .lts import LabelMu, label_to_text, step, traces
from .protocol import (
    Protocol,
    ProtoError,
    RoleTemplate,
    check_deliver_once,
    instantiate,
    load_protocol,
    nonce_cache_run,
    parse_protocol,
)
from .search import (
    Bounds,
    EnumerationResult,
    adversary_view,
    enumerate_bundles,
    secret_kept,
)
from .serialize import bundle_from_text, bundle_to_text
from .strands import (
    Bundle,
    DirectedTerm,
    NodeRef,
    Strand,
    bundle_isomorphic,
    bundle_to_dot,
    causal_order,
    make_bundle,
    minimal_nodes,
    validate_bundle,
)
from .violations import Violation

__version__ = "0.1.0"


def data_path(name: str) -> str:
    """Filesystem path of a shipped sample file, e.g. ``buyer_seller.chor``."""
    return str(resources.files("chorstrand").joinpath("data", name))


__all__ = [
    "AgreementReport",
    "BundleEnv",
    "EndMarker",
    "Interaction",
    "bundle_semantics",
    "check_step_agreement",
    "env_label_sequence",
    "prefix",
    "unprefix",
    "zero_env",
    "AbstractionMap",
    "AmapError",
    "apply_abstraction",
    "bundle_image",
    "load_abstraction_map",
    "parse_abstraction_map",
    "strand_image",
    "Box",
    "Branch",
    "ChorParseError",
    "Com",
    "Value",
    "Zero",
    "check_static_assumptions",
    "chor_to_text",
    "parse_choreography",
    "roles_of",
    "FaithfulnessReport",
    "check_faithfulness",
    "fingerprints_of",
    "is_initial_subbundle",
    "separate",
    "LabelMu",
    "label_to_text",
    "step",
    "traces",
    "Protocol",
    "ProtoError",
    "RoleTemplate",
    "check_deliver_once",
    "instantiate",
    "load_protocol",
    "nonce_cache_run",
    "parse_protocol",
    "Bounds",
    "EnumerationResult",
    "adversary_view",
    "enumerate_bundles",
    "secret_kept",
    "bundle_from_text",
    "bundle_to_text",
    "Bundle",
    "DirectedTerm",
    "NodeRef",
    "Strand",
    "bundle_isomorphic",
    "bundle_to_dot",
    "causal_order",
    "make_bundle",
    "minimal_nodes",
    "validate_bundle",
    "Violation",
    "data_path",
    "__version__",
]
