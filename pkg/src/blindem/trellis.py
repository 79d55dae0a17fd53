"""Finite-state trellises for the ISI channel and the convolutional code.

ISI trellis indexing convention
-------------------------------
A state encodes the last ``L-1`` symbol indices as a base-M integer with
the most recent symbol in the least-significant digit.  Edge ``e`` is
``from_state * M + new_symbol_index``, which makes

* ``from_state(e) = e // M``
* ``to_state(e)   = e mod M^(L-1)``
* ``input_symbol(e) = e mod M``

and lets tap circular shifts and constellation rotations act on the edge
set as pure permutations.  Row ``e`` of ``symbol_tuples`` holds the ``L``
consecutive constellation points generating edge ``e``'s noiseless output
(column 0 multiplies the current-symbol tap).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .channel import ChannelTaps
from .coding import CodeSpec, encoder_step
from .constellation import Constellation


@dataclass(frozen=True)
class IsiTrellis:
    constellation: Constellation
    memory: int
    from_state: np.ndarray      # (E,) int64
    to_state: np.ndarray        # (E,) int64
    input_symbol: np.ndarray    # (E,) int64, constellation index driving each edge
    symbol_tuples: np.ndarray   # (E, L) complex
    in_perm: np.ndarray         # edge order grouping equal to_state, blocks of M
    symbol_perm: np.ndarray     # edge order grouping equal input_symbol

    @property
    def n_states(self) -> int:
        return self.constellation.order ** (self.memory - 1)

    @property
    def n_branches(self) -> int:
        return self.constellation.order ** self.memory


def build_isi_trellis(c: Constellation, memory: int) -> IsiTrellis:
    """Enumerate all M^L symbol tuples as edges of the channel trellis."""
    if memory < 1:
        raise ValueError("channel memory must be at least 1")
    m = c.order
    n_states = m ** (memory - 1)
    n_edges = m ** memory
    e = np.arange(n_edges)
    digits = (e[:, None] // m ** np.arange(memory)[None, :]) % m
    return IsiTrellis(
        constellation=c,
        memory=memory,
        from_state=e // m,
        to_state=e % n_states,
        input_symbol=e % m,
        symbol_tuples=c.points[digits],
        in_perm=np.argsort(e % n_states, kind="stable"),
        symbol_perm=np.argsort(e % m, kind="stable"),
    )


def means_from_taps(tr: IsiTrellis, h: ChannelTaps | np.ndarray) -> np.ndarray:
    """Noiseless output of every edge: symbol_tuples @ taps."""
    taps = h.taps if isinstance(h, ChannelTaps) else np.asarray(h, dtype=complex)
    if taps.shape != (tr.memory,):
        raise ValueError(f"expected {tr.memory} taps, got shape {taps.shape}")
    return tr.symbol_tuples @ taps


@dataclass(frozen=True)
class CodeTrellis:
    """Branch ``b = state * 2 + input_bit`` of the code shift register."""

    spec: CodeSpec
    from_state: np.ndarray   # (B,) int64
    to_state: np.ndarray     # (B,) int64
    input_bit: np.ndarray    # (B,) int64
    out_bits: np.ndarray     # (B, rate_inv) uint8
    in_perm: np.ndarray

    @property
    def n_states(self) -> int:
        return self.spec.n_states

    @property
    def n_branches(self) -> int:
        return 2 * self.spec.n_states


@lru_cache(maxsize=8)
def build_code_trellis(spec: CodeSpec) -> CodeTrellis:
    n_states = spec.n_states
    n_branches = 2 * n_states
    from_state = np.arange(n_branches) // 2
    input_bit = np.arange(n_branches) % 2
    to_state = np.empty(n_branches, dtype=np.int64)
    out_bits = np.empty((n_branches, spec.rate_inv), dtype=np.uint8)
    for s in range(n_states):
        for u in (0, 1):
            nxt, out = encoder_step(s, u, spec)
            to_state[s * 2 + u] = nxt
            out_bits[s * 2 + u] = out
    return CodeTrellis(
        spec=spec,
        from_state=from_state,
        to_state=to_state,
        input_bit=input_bit,
        out_bits=out_bits,
        in_perm=np.argsort(to_state, kind="stable"),
    )
