"""Capacity, converse checks and simulation for modulo-sum relay channels."""

from .capacity import (
    CapacityReport,
    OptimizerOptions,
    QuantizerDesign,
    ahlswede_han_rate,
    capacity_closed_form_binary_uniform,
    capacity_grid_oracle,
    capacity_numeric,
    cutset_bound_binary_uniform,
    direct_link_capacity,
    mgl_conditional_entropy_bound,
    no_corruption_capacity,
)
from .channel import (
    Dmc,
    ExplicitRate,
    RelayChannelSpec,
    blahut_arimoto,
    bsc_relay,
    load_spec,
    parse_spec,
    relay_link_capacity,
    serialize_spec,
)
from .converse import ConverseReport, RelayEncoderTable, enumerate_encoders, verify_lemma1
from .errors import (
    ConvergenceError,
    DomainError,
    GuardError,
    InfeasibleQuantizerError,
    ModRelayError,
    SpecParseError,
    ValidationError,
    VerificationError,
)
from .info import (
    Channel,
    Joint,
    Pmf,
    binary_convolve,
    binary_entropy,
    binary_entropy_inv,
    conditional_entropy,
    entropy,
    mutual_information,
)
from .qfsim import SimConfig, SimReport, simulate

__version__ = "0.1.0"
