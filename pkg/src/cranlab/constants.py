"""Toolkit constants and enumerations."""

from enum import Enum
from fractions import Fraction

# Matrix algebra tolerances
HERMITIAN_RTOL = 1e-12  # relative Frobenius asymmetry allowed on input
PSD_TOL = 1e-10         # min eigenvalue >= -PSD_TOL * trace
PD_TOL = 1e-12          # strict PD: min eigenvalue > PD_TOL * trace

# Rate engines
FEASIBILITY_TOL = 1e-9  # bits/s/Hz, absolute
CROSS_BLOCK_TOL = 1e-12  # relative size of a cross block treated as zero

# Quantizer fitting (bisection over the isotropic level alpha)
BISECTION_TOL = 1e-6      # bits, residual guaranteed on return
BISECTION_TARGET = 1e-9   # bits, residual at which bisection stops early
BISECTION_MAX_ITER = 400
ALPHA_HI_FACTOR = 1e9     # upper bracket = factor * trace of the signal block
ALPHA_LO_FACTOR = 1e-30   # lower bracket = factor * trace of the signal block

# Default physical parameters
DEFAULT_RU_POWER_PER_ANTENNA = 1.0
DEFAULT_UE_TX_POWER = 1.0

# Scenario / spec / manifest file versions
SCENARIO_SCHEMA_VERSION = 1
EXPERIMENT_SCHEMA_VERSION = 1
MANIFEST_VERSION = 1

# IQ codec
DEFAULT_BLOCK_LEN = 32
MIN_BITS_PER_COMPONENT = 1
MAX_BITS_PER_COMPONENT = 20
MAX_LLOYD_MAX_BITS = 8
BASELINE_BITS_PER_COMPONENT = 15  # CPRI LTE reference for compression ratio
LLOYD_MAX_TOL = 1e-9
LLOYD_MAX_MAX_ITER = 200_000
RESAMPLER_TAPS_PER_PHASE = 32
RESAMPLER_REL_BANDWIDTH = 0.9
RESAMPLER_KAISER_BETA = 8.0
BITSTREAM_MAGIC = b"CIQ1"

# CPRI dimensioning
CPRI_MIN_BITS = 8
CPRI_MAX_BITS = 20
CPRI_CONTROL_OVERHEAD = Fraction(16, 15)
CPRI_LINE_CODING = Fraction(10, 8)
CPRI_MAX_LINE_RATE_BPS = 9_830_400_000
# Standard CPRI line-rate options 1..7 (bits/s)
CPRI_OPTION_RATES_BPS = {
    1: 614_400_000,
    2: 1_228_800_000,
    3: 2_457_600_000,
    4: 3_072_000_000,
    5: 4_915_200_000,
    6: 6_144_000_000,
    7: 9_830_400_000,
}

# Layer-2 functional split timing
HARQ_ROUND_TRIP_BUDGET_MS = 3.0   # sub-frame n+4 acknowledgement deadline
SPLIT_A_MAX_ONE_WAY_MS = 1.0
SPLIT_B_MAX_ONE_WAY_MS = 0.1      # well below split A
ASYNC_MAX_ONE_WAY_MS = 20.0
L2_CONTROL_OVERHEAD = 0.10        # control plane adds about 10 %

# RRM simulation
DEFAULT_P_STATIC = 1.0
EXHAUSTIVE_ACTION_LIMIT = 6       # enumerate all 2^N_R sets up to this many RUs
DEFAULT_FRAME_BITS = 1.0          # bits served per (bit/s/Hz) per frame

# Environment variables
ENV_WORKERS = "CRANLAB_WORKERS"
ENV_LOG_LEVEL = "CRANLAB_LOG_LEVEL"


class ChannelMode(Enum):
    """How the downlink channel relates to the uplink draw."""
    TDD_RECIPROCAL = "tdd_reciprocal"
    INDEPENDENT = "independent"


class Receiver(Enum):
    """Uplink receiver at the CU."""
    LINEAR = "linear"
    SIC = "sic"


class UplinkCompression(Enum):
    """Uplink fronthaul compression."""
    INDEPENDENT = "independent"
    WYNER_ZIV = "wyner_ziv"


class Precoder(Enum):
    """Downlink precoding at the CU."""
    LINEAR = "linear"
    DPC = "dpc"


class DownlinkCompression(Enum):
    """Downlink fronthaul compression."""
    INDEPENDENT = "independent"
    MULTIVARIATE = "multivariate"


class FronthaulLink(Enum):
    """Fronthaul cost model a quantizer is fitted against."""
    UL_INDEP = "ul_indep"
    UL_WZ = "ul_wz"
    DL_INDEP = "dl_indep"


class LinkDirection(Enum):
    """Radio link direction."""
    UPLINK = "uplink"
    DOWNLINK = "downlink"


class QuantizerKind(Enum):
    """Scalar quantizer used by the IQ codec."""
    UNIFORM = "uniform"
    LLOYD_MAX = "lloyd_max"


class SplitId(Enum):
    """Layer-2 functional split options."""
    L2_A = "L2_A"
    L2_B = "L2_B"
    L2_C = "L2_C"
    L2_D = "L2_D"


class ProtocolTiming(Enum):
    """Timing class of the protocols above a split."""
    SYNCHRONOUS = "synchronous"
    ASYNCHRONOUS = "asynchronous"


class ExperimentKind(Enum):
    """Batch experiment kinds."""
    UL_RATES = "ul_rates"
    DL_RATES = "dl_rates"
    QUANTIZER_FIT = "quantizer_fit"
    IQ_CODEC = "iq_codec"
    DIMENSIONING = "dimensioning"
    RRM = "rrm"
