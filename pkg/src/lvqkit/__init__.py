"""Lattice vector quantization with adaptive A-law companding.

Lattice nearest-point search and second-moment estimation, hard and soft
quantizers, companding, an adaptive range coder and a small image codec.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ChecksumError,
    ConfigError,
    DecodeError,
    DimensionMismatchError,
    DomainError,
    FormatError,
    LVQError,
    ParameterError,
    SearchSpaceTooLargeError,
    TruncatedStreamError,
)
from .lattice import (  # noqa: E402
    LatticeKind,
    LatticePoint,
    LatticeSpec,
    SecondMomentEstimate,
    estimate_second_moment,
    nearest_point,
    nearest_point_bruteforce,
    nearest_points,
)
from .quantizers import (  # noqa: E402
    FeatureMap,
    QuantizedMap,
    SoftQuantConfig,
    dequantize,
    noise_proxy,
    quantize_lvq,
    quantize_scalar,
    quantize_soft,
    soft_jacobian,
)
from .companding import (  # noqa: E402
    CompandingField,
    alaw_forward,
    alaw_inverse,
    compand_map,
    estimate_field,
    inverse_compand_map,
)
from .entropy import Bitstream, SymbolModel, decode_symbols, empirical_rate, encode_symbols  # noqa: E402
from .imageio import ImageBuffer, read_pnm, write_pnm  # noqa: E402
from .codec import (  # noqa: E402
    CodecConfig,
    Companding,
    RdPoint,
    Transform,
    decode_image,
    encode_image,
    rd_sweep,
)
