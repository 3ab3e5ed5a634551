"""Regime-chain path sampling.

Paths are produced by the direct stochastic simulation recipe: in regime i
the holding time is Exponential(-pi_ii) (absorbing when the rate is zero)
and the next regime j != i is drawn from the embedded-chain row
pi_ij / (-pi_ii).  Batch sampling derives one independent substream per
path index by a counter-based split of the base seed, so path k's draws
do not depend on how many paths are requested, which worker executes it,
or the horizon (extending the horizon extends the same path).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..model import Generator, validate_generator


@dataclass(frozen=True)
class ChainPath:
    """One sampled regime trajectory on [0, horizon].

    jump_times are strictly increasing in (0, horizon); regimes_after[k]
    is the regime entered at jump_times[k].
    """

    i0: int
    jump_times: np.ndarray
    regimes_after: np.ndarray
    horizon: float

    @property
    def n_jumps(self) -> int:
        return self.jump_times.shape[0]

    def segments(self):
        """Yield (t_start, duration, regime) triples partitioning [0, T]."""
        t, regime = 0.0, self.i0
        for tj, rj in zip(self.jump_times, self.regimes_after):
            yield t, float(tj) - t, regime
            t, regime = float(tj), int(rj)
        yield t, self.horizon - t, regime

    def regime_at(self, t: float) -> int:
        """Regime occupied at time t (right-continuous)."""
        k = int(np.searchsorted(self.jump_times, t, side="right"))
        return self.i0 if k == 0 else int(self.regimes_after[k - 1])

    def occupation_fractions(self, D: int) -> np.ndarray:
        """Fraction of [0, horizon] spent in each regime."""
        occ = np.zeros(D)
        for _, dur, regime in self.segments():
            occ[regime] += dur
        return occ / self.horizon


def _sample_with_rng(gen: Generator, i0: int, T: float, rng) -> ChainPath:
    pi = gen.pi
    D = gen.D
    t = 0.0
    regime = i0
    jumps: list[float] = []
    regs: list[int] = []
    while True:
        rate = -pi[regime, regime]
        if rate <= 0.0:
            break
        t += rng.exponential(1.0 / rate)
        if t >= T:
            break
        row = pi[regime].copy()
        row[regime] = 0.0
        cum = np.cumsum(row / rate)
        u = rng.random()
        regime = min(int(np.searchsorted(cum, u, side="right")), D - 1)
        jumps.append(t)
        regs.append(regime)
    return ChainPath(
        i0=i0,
        jump_times=np.asarray(jumps, dtype=np.float64),
        regimes_after=np.asarray(regs, dtype=np.int64),
        horizon=float(T),
    )


def path_rng(base_seed: int, path_index: int) -> np.random.Generator:
    """The dedicated random stream of one path index."""
    ss = np.random.SeedSequence(entropy=base_seed, spawn_key=(path_index,))
    return np.random.Generator(np.random.PCG64(ss))


def sample_chain(gen, i0: int, T: float, seed) -> ChainPath:
    """Sample one regime path on [0, T] from an integer seed."""
    gen = validate_generator(gen)
    if not T > 0:
        raise ValueError(f"horizon must be positive, got {T:g}")
    if not 0 <= i0 < gen.D:
        raise ValueError(f"initial regime {i0} out of range for D={gen.D}")
    return _sample_with_rng(gen, int(i0), float(T), np.random.default_rng(seed))


def sample_chain_batch(
    gen, i0: int, T: float, base_seed: int, n_paths: int
) -> list[ChainPath]:
    """Sample n_paths independent regime paths with per-path substreams."""
    gen = validate_generator(gen)
    if not T > 0:
        raise ValueError(f"horizon must be positive, got {T:g}")
    if not 0 <= i0 < gen.D:
        raise ValueError(f"initial regime {i0} out of range for D={gen.D}")
    return [
        _sample_with_rng(gen, int(i0), float(T), path_rng(base_seed, k))
        for k in range(n_paths)
    ]
