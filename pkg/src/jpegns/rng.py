"""Deterministic random streams.

All randomness in the library flows through Philox-4x64 counter-based
generators (as shipped with numpy), keyed explicitly so that every stream is
a pure function of user-supplied seeds.  Gaussian variates are produced by
the inverse-CDF method only, never by polar or ziggurat rejection, so the
sequence of draws is reproducible from the uniform stream alone and can be
re-derived in any language with a Philox implementation.

Stream key layout (two 64-bit words):

    word 0: the user seed / secret key
    word 1: (domain << 56) | payload

Domains keep unrelated uses of the same seed apart.  Block streams pack the
macro-lattice index and block coordinates into the payload:

    payload = (lattice << 52) | (block_row << 26) | block_col
"""

import numpy as np
from scipy.special import ndtri

DOMAIN_SYNTH = 1
DOMAIN_PSEUDO = 2
DOMAIN_BLOCK = 3

_MASK64 = (1 << 64) - 1


def make_stream(seed, domain, payload=0):
    """Return a ``numpy.random.Generator`` for the given (seed, domain, payload).

    The stream is the Philox-4x64 sequence for key (seed, domain | payload)
    starting at counter zero; the key is installed through the state
    property, which skips the OS-entropy gathering of the key= constructor
    while producing the identical stream.
    """
    if payload < 0 or payload >= (1 << 56):
        raise ValueError("stream payload out of range")
    word1 = ((domain & 0xFF) << 56) | payload
    bitgen = np.random.Philox(seed=0)
    state = bitgen.state
    state["state"]["key"] = np.array(
        [seed & _MASK64, word1 & _MASK64], dtype=np.uint64)
    state["state"]["counter"] = np.zeros(4, dtype=np.uint64)
    state["buffer_pos"] = 4
    state["has_uint32"] = 0
    bitgen.state = state
    return np.random.Generator(bitgen)


def block_stream(key, lattice, block_row, block_col):
    """Per-block stream for embedding: independent across blocks and lattices."""
    if not (1 <= lattice <= 4):
        raise ValueError("lattice index must be in 1..4")
    if block_row >= (1 << 26) or block_col >= (1 << 26):
        raise ValueError("block coordinates too large for stream payload")
    payload = (lattice << 52) | (block_row << 26) | block_col
    return make_stream(key, DOMAIN_BLOCK, payload)


def standard_normal_icdf(gen, size=None):
    """Standard normal draws via the inverse CDF of uniforms from ``gen``."""
    return ndtri(gen.random(size))
