"""Convolutional encoding and random bit interleaving.

The encoder is a feedforward shift register specified by octal generator
polynomials (MSB = tap on the current input bit).  Zero padding bits are
appended so every codeword terminates in the all-zero state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .messages import Message


@dataclass(frozen=True)
class CodeSpec:
    """Feedforward convolutional code.

    ``generators`` hold the polynomial values (e.g. ``(0o5, 0o7)``); one
    output bit per generator per input bit, so the inverse rate equals
    ``len(generators)``.
    """

    generators: tuple[int, ...]
    constraint_length: int
    termination_bits: int

    def __post_init__(self):
        if len(self.generators) < 1:
            raise ValueError("need at least one generator polynomial")
        degree = max(int(g).bit_length() - 1 for g in self.generators)
        if degree + 1 != self.constraint_length:
            raise ValueError(
                f"constraint length {self.constraint_length} does not match "
                f"highest polynomial degree {degree}"
            )
        if self.termination_bits < self.constraint_length - 1:
            raise ValueError("not enough termination bits to force the zero state")

    @property
    def rate_inv(self) -> int:
        return len(self.generators)

    @property
    def n_states(self) -> int:
        return 1 << (self.constraint_length - 1)

    def codeword_length(self, n_info: int) -> int:
        return (n_info + self.termination_bits) * self.rate_inv


# Rate-1/2, constraint length 3, generators (5,7) octal, 2 padding bits.
CODE_57 = CodeSpec(generators=(0o5, 0o7), constraint_length=3, termination_bits=2)


def encoder_step(state: int, bit: int, spec: CodeSpec) -> tuple[int, np.ndarray]:
    """One shift-register transition: returns (next_state, output bits)."""
    reg = (bit << (spec.constraint_length - 1)) | state
    out = np.fromiter(
        ((int(g) & reg).bit_count() & 1 for g in spec.generators),
        dtype=np.uint8,
        count=spec.rate_inv,
    )
    if spec.constraint_length == 1:
        next_state = 0
    else:
        next_state = (bit << (spec.constraint_length - 2)) | (state >> 1)
    return next_state, out


def conv_encode(info_bits, spec: CodeSpec) -> np.ndarray:
    """Encode ``info_bits`` plus termination zeros; ends in the zero state."""
    info_bits = np.asarray(info_bits, dtype=np.uint8).ravel()
    if info_bits.size < 1:
        raise ValueError("need at least one information bit")
    padded = np.concatenate([info_bits, np.zeros(spec.termination_bits, dtype=np.uint8)])
    out = np.empty((padded.size, spec.rate_inv), dtype=np.uint8)
    state = 0
    for k, bit in enumerate(padded):
        state, out[k] = encoder_step(state, int(bit), spec)
    return out.ravel()


@dataclass(frozen=True)
class Interleaver:
    """Bijection on bit positions; ``output[i] = input[permutation[i]]``."""

    permutation: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        perm = np.asarray(self.permutation, dtype=np.int64)
        object.__setattr__(self, "permutation", perm)
        if not np.array_equal(np.sort(perm), np.arange(perm.size)):
            raise ValueError("permutation is not a bijection on its index range")

    @property
    def length(self) -> int:
        return self.permutation.size

    @classmethod
    def identity(cls, length: int) -> "Interleaver":
        return cls(np.arange(length))

    @classmethod
    def random(cls, length: int, rng: np.random.Generator, seed: int | None = None) -> "Interleaver":
        return cls(rng.permutation(length), seed=seed)


def _check_length(n: int, interleaver: Interleaver) -> None:
    if n != interleaver.length:
        raise ValueError(f"length {n} does not match interleaver length {interleaver.length}")


def interleave(x, interleaver: Interleaver):
    """Permute a 1-D array, or the rows of a Message, by the interleaver."""
    if isinstance(x, Message):
        _check_length(x.n, interleaver)
        return Message(x.table[interleaver.permutation], normalized=x.normalized)
    x = np.asarray(x)
    _check_length(x.shape[0], interleaver)
    return x[interleaver.permutation]


def deinterleave(x, interleaver: Interleaver):
    """Inverse of :func:`interleave`."""
    inv = np.empty_like(interleaver.permutation)
    inv[interleaver.permutation] = np.arange(interleaver.length)
    if isinstance(x, Message):
        _check_length(x.n, interleaver)
        return Message(x.table[inv], normalized=x.normalized)
    x = np.asarray(x)
    _check_length(x.shape[0], interleaver)
    return x[inv]
