"""Blind channel estimation via code-aided EM with turbo equalization.

A numpy library implementing an M-PSK receiver that jointly estimates a
block-invariant ISI channel and decodes a convolutionally coded frame,
plus a decoder-evidence detector that corrects the phase and tap-shift
ambiguities blind EM estimators fall into after poor initialization.
"""

from .ambiguity import (
    HypothesisScore,
    MarginRule,
    phase_hypotheses,
    refinement_budget,
    score_hypotheses,
    select_and_refine,
    shift_hypotheses,
)
from .bcjr import (
    BranchMetrics,
    FbResult,
    OperationCount,
    code_branch_metrics,
    count_operations,
    isi_branch_metrics,
    marginalize_bits,
    marginalize_inputs,
    marginalize_symbols,
    run_forward_backward,
)
from .channel import (
    CHANNEL_PROFILES,
    ChannelTaps,
    NoiseSpec,
    apply_channel,
    channel_from_phases,
    draw_channel,
    draw_preamble,
    perturb_init,
    sigma_from_snr,
)
from .coding import (
    CODE_57,
    CodeSpec,
    Interleaver,
    conv_encode,
    deinterleave,
    interleave,
)
from .constellation import QPSK, Constellation, demap_soft, map_soft, map_symbols, symbol_indices
from .em import (
    EmRun,
    GaussianModel,
    em_e_step,
    em_m_step_unconstrained,
    project_linear,
    run_em,
)
from .harness import (
    Frame,
    RunConfig,
    Summary,
    TrialRecord,
    compute_mse,
    emit_results,
    read_trials,
    run_experiment,
    run_trial,
    simulate_frame,
    summarize,
    sweep_failure_rates,
    tap_mse,
    trial_rngs,
)
from .messages import BitMessage, Message, SymbolMessage, logsumexp
from .trellis import (
    CodeTrellis,
    IsiTrellis,
    build_code_trellis,
    build_isi_trellis,
    means_from_taps,
)
from .turbo import (
    DecoderResult,
    TurboOptions,
    TurboOutcome,
    TurboState,
    TurboSystem,
    decoder_pass,
    equalizer_extrinsic,
    run_turbo,
)

__version__ = "0.1.0"
