"""gridshare: two-layer XOR secret sharing across a 3x3 operator/relay grid.

Library layout:

- ``gf4``         GF(4) symbol and packed-block arithmetic (XOR + bit moves)
- ``coding``      two-layer scheme, baselines, exhaustive verifiers, entropy
- ``wire``        12-byte packet header, fragmentation, reassembly
- ``transport``   UDP testbed: sender, uplinks, relays, receiver
- ``attacks``     DoS rules, attack sampling, eavesdrop taps
- ``experiment``  recovery/entropy/latency experiments, CSV + figure output
- ``control``     HTTP control plane with live event stream
- ``cli``         the ``gridshare`` command
"""

from .coding import (
    DEFAULT_PARAMS,
    ONE_LAYER_ALL,
    ONE_LAYER_TWO,
    REPETITION,
    SCHEMES,
    TWO_LAYER,
    EncodingRandomness,
    SchemeParams,
    ShareMatrix,
    VerificationReport,
    decode_one_layer,
    decode_repetition,
    decode_two_layer,
    encode_one_layer,
    encode_repetition,
    encode_two_layer,
    entropy_per_bit,
    select_decodable_submatrix,
    verify_recovery_exhaustive,
    verify_secrecy_exhaustive,
)
from .errors import (
    DispatchError,
    GridShareError,
    InsufficientSharesError,
    IntegrityError,
    LengthMismatchError,
    MalformedHeaderError,
)
from .wire import Fragment, FragmentSet, PacketHeader, fragment_message, reassemble

__version__ = "0.1.0"
