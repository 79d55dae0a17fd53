"""Log-domain probability tables exchanged between receiver stages.

Every soft quantity in the receiver (symbol beliefs, bit beliefs,
likelihood tables) is stored as a ``Message``: a ``(positions, alphabet)``
array of log weights.  Combination is addition, marginalization is
log-sum-exp, and normalization subtracts the per-row log-sum-exp.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

# Absolute floor applied to normalized messages before they are used as
# divisors or priors (hard zeros otherwise produce -inf - -inf).
LOG_FLOOR = float(np.log(1e-12))

NEG_INF = -np.inf


def logsumexp(a, axis=None):
    """Stable log(sum(exp(a))) along ``axis``; all-(-inf) slices give -inf."""
    a = np.asarray(a, dtype=float)
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - m), axis=axis))
    return out + np.squeeze(m, axis=axis) if axis is not None else float(out + m.ravel()[0])


def normalize_log_rows(table):
    """Subtract per-row log-sum-exp so each row sums to 1 in linear domain."""
    lse = logsumexp(table, axis=1)
    if np.any(~np.isfinite(lse)):
        raise ValueError("cannot normalize a row with zero total mass")
    return table - lse[:, None]


@dataclass
class Message:
    """Soft information over ``n`` positions and a finite alphabet.

    Parameters
    ----------
    table : ndarray
        ``(n, alphabet)`` log-domain weights.
    normalized : bool
        True when each row sums to 1 in the linear domain.
    degenerate_rows : int
        Rows that collapsed to zero mass downstream and were replaced by
        uniform rows (tracked by the demapper).
    """

    table: np.ndarray
    normalized: bool = False
    degenerate_rows: int = 0

    def __post_init__(self):
        self.table = np.asarray(self.table, dtype=float)
        if self.table.ndim != 2:
            raise ValueError(f"message table must be 2-D, got shape {self.table.shape}")

    @property
    def n(self) -> int:
        return self.table.shape[0]

    @property
    def alphabet(self) -> int:
        return self.table.shape[1]

    @classmethod
    def uniform(cls, n: int, alphabet: int) -> "Message":
        return cls(np.full((n, alphabet), -np.log(alphabet)), normalized=True)

    @classmethod
    def from_hard(cls, values, alphabet: int) -> "Message":
        """Delta rows: probability 1 on ``values[i]``, 0 elsewhere."""
        values = np.asarray(values, dtype=int)
        table = np.full((values.size, alphabet), NEG_INF)
        table[np.arange(values.size), values] = 0.0
        return cls(table, normalized=True)

    def normalize(self) -> "Message":
        return replace(self, table=normalize_log_rows(self.table), normalized=True)

    def floored(self, log_floor: float = LOG_FLOOR) -> "Message":
        """Clip entries from below; intended for normalized messages."""
        return replace(self, table=np.maximum(self.table, log_floor), normalized=False)

    def floored_relative(self, log_eps: float = LOG_FLOOR) -> "Message":
        """Clip each row at ``row_max + log_eps``; for unnormalized likelihoods."""
        rowmax = np.max(self.table, axis=1, keepdims=True)
        if np.any(~np.isfinite(rowmax)):
            raise ValueError("cannot relative-floor a row with no finite entry")
        return replace(self, table=np.maximum(self.table, rowmax + log_eps), normalized=False)

    def hard_decisions(self) -> np.ndarray:
        """Row-wise argmax; ties resolved toward the lowest index."""
        return np.argmax(self.table, axis=1)


def assert_valid_message(msg: Message, atol: float = 1e-9) -> None:
    """Check the structural invariants (used by tests and debug paths)."""
    if np.any(np.isnan(msg.table)):
        raise AssertionError("message contains NaN")
    if msg.normalized:
        sums = np.exp(logsumexp(msg.table, axis=1))
        if not np.allclose(sums, 1.0, atol=atol):
            raise AssertionError("normalized message rows do not sum to 1")


# The two roles a Message plays in the receiver chain.
BitMessage = Message
SymbolMessage = Message
