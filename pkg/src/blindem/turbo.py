"""Code-aided joint estimation and turbo equalization.

One turbo iteration runs the internal EM pass, converts the equalizer's
extrinsic symbol likelihoods to coded-bit likelihoods (soft demap plus
deinterleave), decodes, and feeds the decoder's extrinsic back through
the interleaver and soft mapper as the next symbol prior.  Ambiguity
detection, when enabled, replaces the decoder pass of the first turbo
iteration: the decoder run of the winning hypothesis is reused for the
extrinsic exchange.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bcjr import (
    FbResult,
    code_branch_metrics,
    marginalize_bits,
    marginalize_inputs,
    marginalize_symbols,
    run_forward_backward,
)
from .coding import CodeSpec, Interleaver, deinterleave, interleave
from .constellation import Constellation, demap_soft, map_soft
from .em import GaussianModel, run_em
from .messages import Message
from .trellis import IsiTrellis, build_code_trellis


@dataclass(frozen=True)
class TurboSystem:
    """Receiver-side description of one transmission."""

    constellation: Constellation
    code: CodeSpec
    interleaver: Interleaver
    isi_trellis: IsiTrellis
    sigma2: float


@dataclass(frozen=True)
class TurboOptions:
    n_turbo: int = 7
    n_em_per_turbo: int = 5
    detector: str = "off"          # off | phase | joint
    margin_threshold: float = 1e3  # natural-log evidence units

    def __post_init__(self):
        if self.n_turbo < 1 or self.n_em_per_turbo < 1:
            raise ValueError("iteration counts must be positive")
        if self.detector not in ("off", "phase", "joint"):
            raise ValueError(f"unknown detector mode {self.detector!r}")


@dataclass
class TurboState:
    """Loop state carried between turbo iterations."""

    turbo_iter: int
    symbol_prior: Message
    bit_prior: Message
    model: GaussianModel
    last_extrinsic_symbol: Message | None = None
    decoder_log_evidence: float = np.nan


@dataclass
class DecoderResult:
    """Soft-in soft-out decoder output for one codeword."""

    bit_joint: Message       # log p(c_k = b, y), offsets retained
    bit_extrinsic: Message   # p(c_k, y) / p(y|c_k), normalized rows
    log_evidence: float
    info_bits: np.ndarray
    branch_updates: int


def equalizer_extrinsic(fb: FbResult, tr: IsiTrellis, symbol_prior: Message) -> Message:
    """Symbol extrinsic likelihood: joint marginal divided by the prior.

    The division is a log-domain subtraction with the prior floored, and
    the evidence offset of the joint is retained.
    """
    joint = marginalize_symbols(fb, tr)
    prior = symbol_prior.floored()
    return Message(joint.table - prior.table, normalized=False)


def decoder_pass(bit_likelihoods: Message, spec: CodeSpec) -> DecoderResult:
    """BCJR over the code trellis with known zero start and end states."""
    tr = build_code_trellis(spec)
    bm = code_branch_metrics(bit_likelihoods, tr)
    start = np.zeros(tr.n_states)
    start[0] = 1.0
    fb = run_forward_backward(bm, tr, start, start)

    bit_joint = marginalize_bits(fb, tr)
    floored = bit_likelihoods.floored_relative()
    bit_extrinsic = Message(bit_joint.table - floored.table).normalize()
    n_info = bm.n_sections - spec.termination_bits
    info_bits = marginalize_inputs(fb, tr).hard_decisions()[:n_info].astype(np.uint8)
    return DecoderResult(
        bit_joint=bit_joint,
        bit_extrinsic=bit_extrinsic,
        log_evidence=fb.log_evidence,
        info_bits=info_bits,
        branch_updates=fb.branch_updates,
    )


@dataclass
class OpsTally:
    """Measured work per trial, split by pipeline stage."""

    isi_passes: int = 0
    isi_branch_updates: int = 0
    decoder_passes: int = 0
    decoder_branch_updates: int = 0
    detection_equalizer_passes: int = 0
    detection_decoder_passes: int = 0
    detection_accounted_branch_updates: int = 0


@dataclass
class TurboOutcome:
    """Everything a trial produces; metric aggregation happens elsewhere."""

    model_trajectory: list[GaussianModel]
    final_model: GaussianModel
    detected_phase_index: int
    detected_shift_index: int
    detection_margin: float
    refinement_applied: bool
    decoder_log_evidences: list[float]
    info_bit_decisions: np.ndarray
    info_bit_error_count: int | None
    degenerate_demap_rows: int
    ops: OpsTally
    final_state: TurboState | None = None


def run_turbo(
    y,
    system: TurboSystem,
    init_taps,
    options: TurboOptions,
    true_info_bits=None,
) -> TurboOutcome:
    """Full receiver: ``n_turbo`` rounds of EM estimation and decoding.

    Detection (when enabled) runs once, after the EM pass of the first
    turbo iteration; an applied refinement replaces the model at that
    point, so the trajectory entry for that EM iteration reflects the
    refined means.
    """
    from .ambiguity import MarginRule, refinement_budget, score_hypotheses, select_and_refine

    y = np.asarray(y, dtype=complex)
    c = system.constellation
    tr = system.isi_trellis
    n_symbols = y.size

    state = TurboState(
        turbo_iter=0,
        symbol_prior=Message.uniform(n_symbols, c.order),
        bit_prior=Message.uniform(n_symbols * c.bits_per_symbol, 2),
        model=GaussianModel.from_taps(tr, init_taps, system.sigma2),
    )
    trajectory: list[GaussianModel] = []
    evidences: list[float] = []
    ops = OpsTally()
    detected_i, detected_tau = -1, -1
    margin = np.nan
    refined = False
    degenerate = 0
    dec = None

    for j in range(options.n_turbo):
        em = run_em(
            y,
            state.model.taps,
            state.symbol_prior,
            options.n_em_per_turbo,
            tr,
            system.sigma2,
            iteration_offset=j * options.n_em_per_turbo,
        )
        state.model = em.models[-1]
        trajectory.extend(em.models)
        ops.isi_passes += em.isi_passes
        ops.isi_branch_updates += em.isi_branch_updates

        if j == 0 and options.detector != "off":
            scores, artifacts = score_hypotheses(
                y, state.model.taps, system, mode=options.detector, base_fb=em.final_fb
            )
            rule = MarginRule(options.margin_threshold)
            new_model, refined, best, margin = select_and_refine(scores, state.model, rule, tr)
            detected_i, detected_tau = best.phase_index, best.shift_index
            if refined:
                state.model = new_model
                trajectory[-1] = new_model
                dec = artifacts.decoders[(best.phase_index, best.shift_index)]
            else:
                dec = artifacts.decoders[(0, 0)]
            state.last_extrinsic_symbol = artifacts.base_extrinsic
            degenerate += artifacts.degenerate_demap_rows
            ops.isi_passes += artifacts.equalizer_passes
            ops.isi_branch_updates += artifacts.equalizer_branch_updates
            ops.decoder_passes += len(scores)
            ops.decoder_branch_updates += artifacts.decoder_branch_updates
            ops.detection_equalizer_passes = artifacts.equalizer_passes
            ops.detection_decoder_passes = len(scores)
            ops.detection_accounted_branch_updates = refinement_budget(
                tr.memory, c.order, n_symbols, c.bits_per_symbol, system.code
            )
        else:
            ext_sym = equalizer_extrinsic(em.final_fb, tr, state.symbol_prior)
            state.last_extrinsic_symbol = ext_sym
            bit_lik = demap_soft(ext_sym, state.bit_prior, c)
            degenerate += bit_lik.degenerate_rows
            coded_lik = deinterleave(bit_lik, system.interleaver)
            dec = decoder_pass(coded_lik, system.code)
            ops.decoder_passes += 1
            ops.decoder_branch_updates += dec.branch_updates

        state.bit_prior = interleave(dec.bit_extrinsic, system.interleaver)
        state.symbol_prior = map_soft(state.bit_prior, c)
        state.decoder_log_evidence = dec.log_evidence
        state.turbo_iter = j + 1
        evidences.append(dec.log_evidence)

    errors = None
    if true_info_bits is not None:
        true_info_bits = np.asarray(true_info_bits, dtype=np.uint8)
        errors = int(np.sum(dec.info_bits != true_info_bits))
    return TurboOutcome(
        model_trajectory=trajectory,
        final_model=state.model,
        detected_phase_index=detected_i,
        detected_shift_index=detected_tau,
        detection_margin=margin,
        refinement_applied=refined,
        decoder_log_evidences=evidences,
        info_bit_decisions=dec.info_bits,
        info_bit_error_count=errors,
        degenerate_demap_rows=degenerate,
        ops=ops,
        final_state=state,
    )
