"""Log-domain forward-backward (BCJR) inference over a trellis.

The recursions run entirely in the log domain with log-sum-exp as the
reduction, normalizing every step and accumulating the subtracted log
scale so the evidence is recovered exactly.  This survives the extreme
metric ranges a near-noiseless model produces, where normalized linear
state vectors would underflow to hard zeros.

Every pass tallies its branch-metric work so measured operation counts
can be checked against the closed-form complexity accounting:
``T * M^L`` per equalizer pass and ``T * log2(M) * 2^Lc`` per decoder
pass (one multiply per branch and coded bit).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .messages import Message, logsumexp
from .trellis import CodeTrellis, IsiTrellis

NEG_INF = -np.inf


@dataclass
class BranchMetrics:
    """Per-section log branch metrics ``log_gamma[t, branch]``.

    ``ops_per_branch`` is the multiply count attributed to one branch
    metric (1 for the ISI trellis, ``rate_inv`` for the code trellis).
    """

    log_gamma: np.ndarray
    ops_per_branch: int = 1

    @property
    def n_sections(self) -> int:
        return self.log_gamma.shape[0]

    @property
    def branch_updates(self) -> int:
        return self.log_gamma.shape[0] * self.log_gamma.shape[1] * self.ops_per_branch


@dataclass
class FbResult:
    """Forward-backward output.

    ``alpha``/``beta`` rows are normalized distributions in the log
    domain; the true (joint) quantities are recovered by adding the
    matching scale entry.  ``log_edge_joint[t, e]`` is
    ``log p(edge_t = e, y)`` and ``edge_posteriors`` is its row-wise
    softmax in the linear domain.
    """

    alpha: np.ndarray          # (T+1, S) log, rows normalized
    beta: np.ndarray           # (T+1, S) log, rows normalized
    alpha_scale: np.ndarray    # (T+1,)
    beta_scale: np.ndarray     # (T+1,)
    log_edge_joint: np.ndarray  # (T, B)
    edge_posteriors: np.ndarray  # (T, B) linear, rows sum to 1
    log_evidence: float
    branch_updates: int


@njit(cache=True)
def _log_recursion(log_gamma, src, dst, log_init, n_states):
    """Grouped log-sum-exp recursion with per-step normalization.

    Walks sections in ascending order accumulating
    ``state[dst] (+)= state[src] + log_gamma[t, e]`` where ``(+)`` is
    log-sum-exp.  Rows of the returned table are normalized log
    distributions; ``scale`` accumulates the subtracted normalizers.
    ``ok`` is False when a section has no surviving path.
    """
    n_sections, n_branches = log_gamma.shape
    table = np.empty((n_sections + 1, n_states))
    scale = np.empty(n_sections + 1)
    state = log_init.copy()
    table[0] = state
    scale[0] = 0.0
    contrib = np.empty(n_branches)
    mx = np.empty(n_states)
    acc = np.empty(n_states)
    for t in range(n_sections):
        for s in range(n_states):
            mx[s] = -np.inf
            acc[s] = 0.0
        for e in range(n_branches):
            v = state[src[e]] + log_gamma[t, e]
            contrib[e] = v
            if v > mx[dst[e]]:
                mx[dst[e]] = v
        for e in range(n_branches):
            d = dst[e]
            if mx[d] > -np.inf:
                acc[d] += np.exp(contrib[e] - mx[d])
        step_max = -np.inf
        for s in range(n_states):
            if mx[s] > -np.inf:
                state[s] = mx[s] + np.log(acc[s])
            else:
                state[s] = -np.inf
            if state[s] > step_max:
                step_max = state[s]
        if step_max == -np.inf:
            return table, scale, False
        total = 0.0
        for s in range(n_states):
            total += np.exp(state[s] - step_max)
        log_total = step_max + np.log(total)
        for s in range(n_states):
            state[s] = state[s] - log_total
        table[t + 1] = state
        scale[t + 1] = scale[t] + log_total
    return table, scale, True


def _safe_log(a):
    with np.errstate(divide="ignore"):
        return np.log(a)


def run_forward_backward(bm: BranchMetrics, tr, init_alpha, init_beta) -> FbResult:
    """Exact edge posteriors and model evidence for any uniform-degree trellis.

    ``init_alpha`` is the start-state distribution, ``init_beta`` the
    terminal state weighting; the evidence is
    ``log sum_s alpha_T(s) * init_beta(s)``.
    """
    log_gamma = bm.log_gamma
    n_sections = log_gamma.shape[0]
    n_states = tr.n_states
    if log_gamma.shape[1] != tr.n_branches:
        raise ValueError("branch metric width does not match trellis branch count")

    init_alpha = np.asarray(init_alpha, dtype=float)
    init_beta = np.asarray(init_beta, dtype=float)
    if init_alpha.shape != (n_states,) or init_beta.shape != (n_states,):
        raise ValueError("initial distributions must have one entry per state")

    if np.any(np.isnan(log_gamma)):
        raise ValueError("branch metrics contain NaN")

    src = np.ascontiguousarray(tr.from_state)
    dst = np.ascontiguousarray(tr.to_state)
    log_alpha, alpha_scale, ok = _log_recursion(
        np.ascontiguousarray(log_gamma), src, dst, _safe_log(init_alpha), n_states
    )
    if not ok:
        raise ValueError("inconsistent trellis/metrics: forward pass died")
    beta_rev, beta_scale_rev, ok = _log_recursion(
        np.ascontiguousarray(log_gamma[::-1]),
        dst,
        src,
        _safe_log(init_beta),
        n_states,
    )
    if not ok:
        raise ValueError("inconsistent trellis/metrics: backward pass died")
    log_beta = beta_rev[::-1]
    beta_scale = beta_scale_rev[::-1]
    log_edge_joint = (
        log_alpha[:-1, :][:, src]
        + log_gamma
        + log_beta[1:, :][:, dst]
        + (alpha_scale[:-1] + beta_scale[1:])[:, None]
    )
    row_lse = logsumexp(log_edge_joint, axis=1)
    edge_posteriors = np.exp(log_edge_joint - row_lse[:, None])
    log_evidence = float(
        alpha_scale[-1] + logsumexp(log_alpha[-1] + _safe_log(init_beta))
    )
    return FbResult(
        alpha=log_alpha,
        beta=log_beta,
        alpha_scale=alpha_scale,
        beta_scale=beta_scale,
        log_edge_joint=log_edge_joint,
        edge_posteriors=edge_posteriors,
        log_evidence=log_evidence,
        branch_updates=bm.branch_updates,
    )


def isi_branch_metrics(
    y, means, sigma2: float, symbol_priors: Message, tr: IsiTrellis
) -> BranchMetrics:
    """Gaussian likelihood plus symbol prior for every edge and time step.

    ``log_gamma[t, e] = -log(pi*sigma2) - |y_t - means[e]|^2 / sigma2
    + log p(x_t = input_symbol(e))``.
    """
    y = np.asarray(y, dtype=complex)
    means = np.asarray(means, dtype=complex)
    if means.shape != (tr.n_branches,):
        raise ValueError("need one mean per trellis edge")
    if not sigma2 > 0:
        raise ValueError("noise variance must be positive")
    if symbol_priors.n != y.size or symbol_priors.alphabet != tr.constellation.order:
        raise ValueError("symbol priors must be (T, M)")
    sq = np.abs(y[:, None] - means[None, :]) ** 2
    log_gamma = (
        -np.log(np.pi * sigma2)
        - sq / sigma2
        + symbol_priors.table[:, tr.input_symbol]
    )
    return BranchMetrics(log_gamma, ops_per_branch=1)


def code_branch_metrics(bit_likelihoods: Message, tr: CodeTrellis) -> BranchMetrics:
    """Decoder branch metrics from coded-bit likelihood rows.

    Information sections carry a uniform input prior; the trailing
    termination sections force input bit 0.
    """
    spec = tr.spec
    rate = spec.rate_inv
    if bit_likelihoods.alphabet != 2 or bit_likelihoods.n % rate != 0:
        raise ValueError("bit likelihoods must be (n_sections * rate_inv, 2)")
    n_sections = bit_likelihoods.n // rate
    n_info = n_sections - spec.termination_bits
    if n_info < 1:
        raise ValueError("likelihood table shorter than the termination tail")

    per_section = bit_likelihoods.table.reshape(n_sections, rate, 2)
    # gather[k, b] = sum_i likelihood of output bit i taking the branch's value
    gather = per_section[:, np.arange(rate)[None, :], tr.out_bits].sum(axis=2)
    log_gamma = gather - np.log(2.0)
    tail = np.where(tr.input_bit == 0, np.log(2.0), NEG_INF)
    log_gamma[n_info:] += tail[None, :]
    return BranchMetrics(log_gamma, ops_per_branch=rate)


def marginalize_symbols(fb: FbResult, tr: IsiTrellis) -> Message:
    """Joint symbol beliefs ``log p(x_t = m, y)`` (evidence offset retained)."""
    m = tr.constellation.order
    grouped = fb.log_edge_joint[:, tr.symbol_perm].reshape(
        fb.log_edge_joint.shape[0], m, -1
    )
    return Message(logsumexp(grouped, axis=2), normalized=False)


def marginalize_bits(fb: FbResult, tr: CodeTrellis) -> Message:
    """Joint coded-bit beliefs ``log p(c_k = b, y)`` for every coded bit."""
    spec = tr.spec
    n_sections = fb.log_edge_joint.shape[0]
    out = np.empty((n_sections, spec.rate_inv, 2))
    for i in range(spec.rate_inv):
        for v in (0, 1):
            mask = tr.out_bits[:, i] == v
            out[:, i, v] = logsumexp(
                np.where(mask[None, :], fb.log_edge_joint, NEG_INF), axis=1
            )
    return Message(out.reshape(n_sections * spec.rate_inv, 2), normalized=False)


def marginalize_inputs(fb: FbResult, tr: CodeTrellis) -> Message:
    """Joint input-bit beliefs per section (for hard decisions)."""
    out = np.empty((fb.log_edge_joint.shape[0], 2))
    for v in (0, 1):
        mask = tr.input_bit == v
        out[:, v] = logsumexp(
            np.where(mask[None, :], fb.log_edge_joint, NEG_INF), axis=1
        )
    return Message(out, normalized=False)


@dataclass(frozen=True)
class OperationCount:
    """Closed-form branch-update accounting for one pass."""

    n_sections: int
    branches_per_section: int
    ops_per_branch: int

    @property
    def branch_updates(self) -> int:
        return self.n_sections * self.branches_per_section * self.ops_per_branch


def count_operations(tr, n_symbols: int, bits_per_symbol: int | None = None) -> OperationCount:
    """Predicted branch updates for one pass over ``n_symbols`` symbols.

    ISI trellis: ``n_symbols * M^L``.  Code trellis:
    ``n_symbols * bits_per_symbol * 2^Lc`` (sections times branches times
    coded bits per branch).
    """
    if isinstance(tr, IsiTrellis):
        return OperationCount(n_symbols, tr.n_branches, 1)
    if isinstance(tr, CodeTrellis):
        if bits_per_symbol is None:
            raise ValueError("bits_per_symbol is required for the code trellis")
        rate = tr.spec.rate_inv
        n_coded = n_symbols * bits_per_symbol
        if n_coded % rate != 0:
            raise ValueError("coded bit count is not a whole number of sections")
        return OperationCount(n_coded // rate, tr.n_branches, rate)
    raise TypeError(f"unsupported trellis type {type(tr).__name__}")
