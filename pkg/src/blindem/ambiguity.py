"""Joint phase and tap-shift ambiguity detection via decoder evidence.

An M-PSK constellation is invariant under rotations by ``2*pi/M`` and the
set of noiseless channel outputs is invariant under circular shifts of
the tap vector, so a blind estimator can converge to any of ``L*M``
physically equivalent-looking models.  The decoder is not fooled: only
the correctly aligned candidate produces coded-bit likelihoods
consistent with the code.  Each candidate model is scored by its decoder
evidence and the winner refines the estimate, guarded by an evidence
margin.

Rotation conventions (fixed by the end-to-end injection tests, which pin
the composition ``detect -> refine`` to actually undo an injected
rotation or shift):

* phase hypothesis ``i`` asserts the estimate is the truth rotated by
  ``exp(+2j*pi*i/M)``; it reindexes extrinsic rows as
  ``candidate[m] = extrinsic[(m - i) mod M]`` (``np.roll(row, +i)``),
* shift hypothesis ``tau`` evaluates ``np.roll(taps, tau)``,
* an accepted winner rescales the model by ``exp(-2j*pi*i/M)`` applied
  to ``np.roll(taps, tau)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coding import deinterleave
from .em import GaussianModel
from .messages import Message
from .trellis import IsiTrellis, means_from_taps
from .turbo import DecoderResult, decoder_pass, equalizer_extrinsic


@dataclass(frozen=True)
class HypothesisScore:
    phase_index: int
    shift_index: int
    log_evidence: float


@dataclass(frozen=True)
class MarginRule:
    """Refine only when the winner beats the runner-up by ``threshold``
    natural-log evidence units."""

    threshold: float = 1e3

    def __post_init__(self):
        if self.threshold < 0:
            raise ValueError("margin threshold must be non-negative")


def phase_hypotheses(extrinsic: Message) -> list[Message]:
    """All M circular reindexings of the symbol axis; hypothesis 0 is the
    identity and hypothesis i+M equals hypothesis i."""
    m = extrinsic.alphabet
    return [
        Message(np.roll(extrinsic.table, i, axis=1), normalized=extrinsic.normalized)
        for i in range(m)
    ]


def shift_hypotheses(taps) -> list[np.ndarray]:
    """All L circular rotations of the tap vector; candidate 0 is the identity."""
    taps = np.asarray(taps, dtype=complex)
    return [np.roll(taps, tau) for tau in range(taps.size)]


@dataclass
class DetectionArtifacts:
    """Cached per-hypothesis work so the winner's decode can be reused."""

    decoders: dict[tuple[int, int], DecoderResult]
    base_extrinsic: Message
    equalizer_passes: int
    equalizer_branch_updates: int
    decoder_branch_updates: int
    degenerate_demap_rows: int


def score_hypotheses(
    y, taps, system, mode: str = "joint", base_fb=None
) -> tuple[list[HypothesisScore], DetectionArtifacts]:
    """Decoder evidence for every candidate model.

    For each tap shift the equalizer runs once with the shifted means and
    uniform symbol priors; each phase reindexing of its extrinsic output
    is then demapped, deinterleaved, and decoded.  ``base_fb`` lets the
    caller reuse the forward-backward pass already computed for the
    unshifted model.
    """
    from .constellation import demap_soft
    from .em import em_e_step

    tr: IsiTrellis = system.isi_trellis
    c = system.constellation
    taps = np.asarray(taps, dtype=complex)
    n_symbols = np.asarray(y).size
    uniform_sym = Message.uniform(n_symbols, c.order)
    uniform_bits = Message.uniform(n_symbols * c.bits_per_symbol, 2)

    shifts = shift_hypotheses(taps) if mode == "joint" else [taps.copy()]
    scores: list[HypothesisScore] = []
    decoders: dict[tuple[int, int], DecoderResult] = {}
    base_extrinsic = None
    eq_passes = 0
    eq_updates = 0
    dec_updates = 0
    degenerate = 0

    for tau, cand_taps in enumerate(shifts):
        if tau == 0 and base_fb is not None:
            fb = base_fb
        else:
            model = GaussianModel.from_taps(tr, cand_taps, system.sigma2)
            fb = em_e_step(y, model, uniform_sym, tr)
            eq_passes += 1
            eq_updates += fb.branch_updates
        extrinsic = equalizer_extrinsic(fb, tr, uniform_sym)
        if tau == 0:
            base_extrinsic = extrinsic
        for i, candidate in enumerate(phase_hypotheses(extrinsic)):
            bit_lik = demap_soft(candidate, uniform_bits, c)
            degenerate += bit_lik.degenerate_rows
            coded_lik = deinterleave(bit_lik, system.interleaver)
            dec = decoder_pass(coded_lik, system.code)
            dec_updates += dec.branch_updates
            scores.append(HypothesisScore(i, tau, dec.log_evidence))
            decoders[(i, tau)] = dec

    artifacts = DetectionArtifacts(
        decoders=decoders,
        base_extrinsic=base_extrinsic,
        equalizer_passes=eq_passes,
        equalizer_branch_updates=eq_updates,
        decoder_branch_updates=dec_updates,
        degenerate_demap_rows=degenerate,
    )
    return scores, artifacts


def select_and_refine(
    scores: list[HypothesisScore],
    model: GaussianModel,
    rule: MarginRule,
    tr: IsiTrellis,
) -> tuple[GaussianModel, bool, HypothesisScore, float]:
    """Argmax over candidate evidences plus the margin guard.

    Returns ``(model, applied, winner, margin)``; the model is unchanged
    when the winner-vs-runner-up evidence margin is below the threshold.
    """
    if not scores:
        raise ValueError("no hypothesis scores to select from")
    best = max(scores, key=lambda s: s.log_evidence)
    if len(scores) == 1:
        margin = np.inf
    else:
        ranked = sorted((s.log_evidence for s in scores), reverse=True)
        margin = ranked[0] - ranked[1]
    if margin < rule.threshold:
        return model, False, best, margin

    m = tr.constellation.order
    phase = 2.0 * np.pi * best.phase_index / m
    new_taps = np.exp(-1j * phase) * np.roll(model.taps, best.shift_index)
    refined = GaussianModel(
        means=means_from_taps(tr, new_taps),
        sigma2=model.sigma2,
        taps=new_taps,
        iteration=model.iteration,
    )
    return refined, True, best, margin


def refinement_budget(
    memory: int, order: int, n_symbols: int, bits_per_symbol: int, spec
) -> int:
    """One-time detection cost attributed in the complexity accounting:
    ``(L-1)(M-1)`` extra decoder passes of ``T*log2(M)*2^Lc`` updates."""
    per_decode = n_symbols * bits_per_symbol * (1 << spec.constraint_length)
    return (memory - 1) * (order - 1) * per_decode
