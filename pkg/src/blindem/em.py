"""EM estimation of the per-edge Gaussian means with a linear tap constraint.

Each iteration runs the forward-backward E-step, re-estimates every edge
mean as a responsibility-weighted average of the observations, then
projects the unconstrained means onto the tap subspace by least squares
(``taps = pinv(symbol_tuples) @ means``); the noise variance is known and
never re-estimated.  The projection step can be disabled, in which case
the update is a plain mixture-mean M-step and the model evidence is
non-decreasing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bcjr import FbResult, isi_branch_metrics, run_forward_backward
from .messages import Message
from .trellis import IsiTrellis, means_from_taps

# A mean whose responsibility mass falls below MASS_FLOOR_SCALE * T keeps
# its previous value instead of dividing by (near) zero.
MASS_FLOOR_SCALE = 1e-8


@dataclass
class GaussianModel:
    """Edge-mean parameter set with fixed noise variance.

    ``taps`` is the current constrained tap vector (None while running
    without the projection).  After every constrained update
    ``means == symbol_tuples @ taps``.
    """

    means: np.ndarray
    sigma2: float
    taps: np.ndarray | None = None
    iteration: int = 0

    @classmethod
    def from_taps(cls, tr: IsiTrellis, taps, sigma2: float, iteration: int = 0) -> "GaussianModel":
        taps = np.asarray(taps, dtype=complex)
        return cls(means=means_from_taps(tr, taps), sigma2=float(sigma2), taps=taps, iteration=iteration)


def em_e_step(y, model: GaussianModel, symbol_priors: Message, tr: IsiTrellis) -> FbResult:
    """Edge responsibilities under the current model (blind start/end states)."""
    bm = isi_branch_metrics(y, model.means, model.sigma2, symbol_priors, tr)
    uniform = np.full(tr.n_states, 1.0 / tr.n_states)
    return run_forward_backward(bm, tr, uniform, uniform)


def em_m_step_unconstrained(fb: FbResult, y, prev_means, mass_floor: float) -> np.ndarray:
    """Responsibility-weighted means; components below the mass floor keep
    their previous value."""
    y = np.asarray(y, dtype=complex)
    resp = fb.edge_posteriors
    mass = resp.sum(axis=0)
    num = resp.T @ y
    with np.errstate(divide="ignore", invalid="ignore"):
        means = np.where(mass >= mass_floor, num / mass, np.asarray(prev_means, dtype=complex))
    return means


def project_linear(means_unconstrained, tr: IsiTrellis) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares fit of taps to the means and the re-synthesized means."""
    mu = np.asarray(means_unconstrained, dtype=complex)
    taps, _, rank, _ = np.linalg.lstsq(tr.symbol_tuples, mu, rcond=None)
    if rank < tr.memory:
        raise ValueError("symbol tuple matrix is rank deficient")
    return taps, tr.symbol_tuples @ taps


@dataclass
class EmRun:
    """Trajectory of one EM pass plus the final-model forward-backward."""

    models: list[GaussianModel]        # model after each iteration's update
    log_evidences: np.ndarray          # evidence of the model entering each E-step
    final_fb: FbResult                 # E-step output at the final model
    isi_passes: int
    isi_branch_updates: int


def run_em(
    y,
    init_taps,
    symbol_priors: Message,
    n_iters: int,
    tr: IsiTrellis,
    sigma2: float,
    project: bool = True,
    iteration_offset: int = 0,
) -> EmRun:
    """Alternate E-step / M-step / projection for ``n_iters`` iterations.

    ``init_taps`` may be a tap vector (projected mode) or, when
    ``project=False``, a full mean vector of length ``n_branches``.
    Symbol priors are held fixed for the whole pass.  A final
    forward-backward at the updated model is returned for the turbo
    exchange, so the pass runs ``n_iters + 1`` equalizer recursions.
    """
    if n_iters < 1:
        raise ValueError("need at least one EM iteration")
    init = np.asarray(init_taps, dtype=complex)
    if project:
        model = GaussianModel.from_taps(tr, init, sigma2, iteration=iteration_offset)
    else:
        if init.shape != (tr.n_branches,):
            raise ValueError("unprojected mode expects one initial mean per edge")
        model = GaussianModel(means=init, sigma2=float(sigma2), taps=None, iteration=iteration_offset)

    mass_floor = MASS_FLOOR_SCALE * len(y)
    models: list[GaussianModel] = []
    evidences = np.empty(n_iters)
    passes = 0
    updates = 0
    for n in range(n_iters):
        fb = em_e_step(y, model, symbol_priors, tr)
        passes += 1
        updates += fb.branch_updates
        evidences[n] = fb.log_evidence
        means = em_m_step_unconstrained(fb, y, model.means, mass_floor)
        if project:
            taps, means = project_linear(means, tr)
        else:
            taps = None
        model = GaussianModel(means=means, sigma2=model.sigma2, taps=taps,
                              iteration=model.iteration + 1)
        models.append(model)
    final_fb = em_e_step(y, model, symbol_priors, tr)
    passes += 1
    updates += final_fb.branch_updates
    return EmRun(
        models=models,
        log_evidences=evidences,
        final_fb=final_fb,
        isi_passes=passes,
        isi_branch_updates=updates,
    )
