"""Zero-delay lossy coding of vector Gauss-Markov sources.

The package computes the steady-state nonanticipative rate-distortion
function of ``x[t+1] = A x[t] + B w[t]``, builds the feedback channel that
attains it and runs an operational coder (dithered scalar quantization plus
entropy coding) whose rate is checked against the resulting bounds.
"""

__version__ = "0.1.0"

from .codec import (CodecDesign, CodecState, SimulationReport, decode_step, decode_stream,
                    encode_step, encode_trajectory, run_pipeline)
from .ecdq import DitherStream, QuantizerConfig, quantize_subtractive, reconstruct, step_sizes
from .entropy import ConditionalPmf, conditional_pmf, shannon_length_check
from .estimators import NrdfSolver, ZeroDelayCodec
from .exceptions import (BitstreamCorrupt, ConfigError, DegenerateComponent, DimensionMismatch,
                         DimensionTooLarge, IndexOutOfSupport, InvalidGp, NoConvergence,
                         NonPositiveInput, NonPositiveSigma, NonPositiveVariance, NotStabilizable,
                         ZeroDelayError)
from .model import (ArCoefficients, SpectrumReport, StateSpaceModel, ValidatedModel, augment_ar,
                    load_model, simulate_source, spectrum, validate_model)
from .nrdf import (BoundsReport, NrdfSolution, bounds, grid_oracle_nrdf, rate_distortion_sweep,
                   reverse_waterfill, solve_nrdf)
from .realization import (RealizationParams, RealizationTrace, derive_channel, kalman_recursion,
                          simulate_awgn)
