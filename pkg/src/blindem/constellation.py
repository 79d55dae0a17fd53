"""M-PSK constellations: bit/symbol mapping and soft (de)mapping.

Labeling is natural binary: a symbol index is the MSB-first integer value
of its bit group, and index ``i`` sits at phase ``2*pi*i/M``.  With this
labeling a constellation rotation by a multiple of ``2*pi/M`` is a pure
circular reindexing of the symbol alphabet.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .messages import LOG_FLOOR, Message, logsumexp, normalize_log_rows

NEG_INF = -np.inf


@dataclass(frozen=True)
class Constellation:
    """Unit-energy M-PSK alphabet with natural binary labeling."""

    order: int

    def __post_init__(self):
        m = self.order
        if m < 2 or (m & (m - 1)) != 0:
            raise ValueError(f"modulation order must be a power of 2, got {m}")

    @property
    def bits_per_symbol(self) -> int:
        return int(self.order).bit_length() - 1

    @property
    def points(self) -> np.ndarray:
        return np.exp(2j * np.pi * np.arange(self.order) / self.order)

    @property
    def labels(self) -> np.ndarray:
        """(M, bits_per_symbol) bit labels, MSB first; row i labels index i."""
        b = self.bits_per_symbol
        idx = np.arange(self.order)
        return ((idx[:, None] >> np.arange(b - 1, -1, -1)[None, :]) & 1).astype(np.uint8)


QPSK = Constellation(4)


def _group_bits(bits, c: Constellation) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.uint8)
    b = c.bits_per_symbol
    if bits.size % b != 0:
        raise ValueError(f"bit count {bits.size} not divisible by {b} bits per symbol")
    return bits.reshape(-1, b)


def symbol_indices(bits, c: Constellation) -> np.ndarray:
    """Pack consecutive bit groups into MSB-first symbol indices."""
    groups = _group_bits(bits, c)
    weights = 1 << np.arange(c.bits_per_symbol - 1, -1, -1)
    return groups @ weights


def map_symbols(bits, c: Constellation) -> np.ndarray:
    """Map coded bits onto constellation points (length/bits_per_symbol symbols)."""
    return c.points[symbol_indices(bits, c)]


def map_soft(bit_msg: Message, c: Constellation) -> Message:
    """Bit beliefs -> symbol beliefs: product of the bits in each label.

    Rows of the output are normalized.  Uniform bit beliefs give the
    uniform symbol distribution used to bootstrap the first turbo pass.
    """
    b = c.bits_per_symbol
    if bit_msg.alphabet != 2:
        raise ValueError("bit message must have alphabet 2")
    if bit_msg.n % b != 0:
        raise ValueError(f"bit count {bit_msg.n} not divisible by {b} bits per symbol")
    per_sym = bit_msg.table.reshape(-1, b, 2)  # (T, b, 2)
    # gather[t, m, j] = log weight of bit j taking the value in label m
    gather = per_sym[:, np.arange(b)[None, :], c.labels]
    table = gather.sum(axis=2)
    return Message(normalize_log_rows(table), normalized=True)


def demap_soft(sym_msg: Message, bit_priors: Message, c: Constellation) -> Message:
    """Symbol likelihoods -> extrinsic bit likelihoods.

    For each bit the likelihood of value ``v`` marginalizes the symbol
    likelihood over labels carrying ``v`` at that position, weighted by the
    priors of the *other* bits of the same symbol (the own-bit prior is
    excluded).  Rows whose total mass collapses to zero are replaced by
    uniform rows and counted in ``degenerate_rows``.
    """
    b = c.bits_per_symbol
    if sym_msg.alphabet != c.order:
        raise ValueError("symbol message alphabet does not match constellation order")
    if bit_priors.n != sym_msg.n * b or bit_priors.alphabet != 2:
        raise ValueError("bit priors must cover bits_per_symbol bits for every symbol")

    t = sym_msg.n
    priors = np.maximum(bit_priors.table, LOG_FLOOR).reshape(t, b, 2)
    # own[t, m, j] = prior of bit j under label m; sib = sum over the other bits
    own = priors[:, np.arange(b)[None, :], c.labels]  # (T, M, b)
    sib = own.sum(axis=2, keepdims=True) - own
    scored = sym_msg.table[:, :, None] + sib  # (T, M, b)

    out = np.empty((t, b, 2))
    for v in (0, 1):
        mask = (c.labels == v)[None, :, :]  # (1, M, b)
        out[:, :, v] = logsumexp(np.where(mask, scored, NEG_INF), axis=1)
    out = out.reshape(t * b, 2)

    dead = ~np.isfinite(np.max(out, axis=1))
    n_dead = int(dead.sum())
    if n_dead:
        out[dead] = -np.log(2.0)
    return Message(out, normalized=False, degenerate_rows=n_dead)
