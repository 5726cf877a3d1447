"""Counter-based random number streams.

One Philox stream per (replication, particle). The stream is a pure
function of (master_seed, replication, particle), so any partition of the
work across workers reproduces the same Brownian increments bit for bit,
and increments can be regenerated on demand instead of stored.

Derived plans (`child`) give statistically separated seed spaces to
distinct phases of an experiment (reference-law iterations, per-N entropy
runs, ...) so replication indices never collide across phases.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

__all__ = ["RngPlan", "draw_path_randomness"]

_U32 = (1 << 32) - 1
_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngPlan:
    master_seed: int

    def __post_init__(self):
        if not 0 <= self.master_seed <= _U64:
            raise ValueError("master_seed must fit in 64 bits")

    def child(self, label: str) -> "RngPlan":
        """A plan whose streams are disjoint from this plan's other children."""
        digest = hashlib.sha256(
            self.master_seed.to_bytes(8, "little") + label.encode("utf-8")
        ).digest()
        return RngPlan(int.from_bytes(digest[:8], "little"))

    def stream(self, replication: int, particle: int) -> np.random.Generator:
        """The (replication, particle) stream; identical for any worker layout."""
        if not 0 <= replication <= _U32 or not 0 <= particle <= _U32:
            raise ValueError("replication and particle ids must fit in 32 bits")
        key = np.array(
            [self.master_seed, (replication << 32) | particle], dtype=np.uint64
        )
        return np.random.Generator(np.random.Philox(key=key))

    def scalar_stream(self, replication: int) -> np.random.Generator:
        return self.stream(replication, _U32)


def draw_path_randomness(plan, keys, init_sampler, n_steps, m, h):
    """Initial conditions and Brownian increments for a set of paths.

    keys: sequence of (replication, particle) stream ids, one per path.
    Per path, the stream is consumed in a fixed order: first whatever
    `init_sampler(gen)` draws, then n_steps*m standard normals (scaled by
    sqrt(h)). Calling this again with the same arguments regenerates the
    identical arrays, which is how Girsanov integrands recover the
    increments actually used in a simulation.
    """
    sqrt_h = np.sqrt(h)
    x0 = None
    dw = np.empty((len(keys), n_steps, m))
    for i, (rep, pid) in enumerate(keys):
        gen = plan.stream(rep, pid)
        xi = np.asarray(init_sampler(gen), dtype=np.float64).reshape(-1)
        if x0 is None:
            x0 = np.empty((len(keys), xi.shape[0]))
        x0[i] = xi
        dw[i] = gen.standard_normal((n_steps, m)) * sqrt_h
    return x0, dw
