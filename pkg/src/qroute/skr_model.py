"""Secret-key rate of swap-ASAP repeater chains.

Closed-form pieces (success probability, Werner parameters, binary entropy,
secret-key fraction, the link-count threshold) plus the seeded Monte-Carlo
estimator that every pathfinding algorithm queries.

The estimator draws one geometric number of synchronized attempts per link
and per delivered pair, applies memory depolarization at every repeater
that has to wait for its second link, and returns
``sum(secret-key fractions) / sum(pair durations)``.
"""

from __future__ import annotations

import hashlib
import math
import struct
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

DEFAULT_SAMPLES = 10_000
# Samples per counter-based random stream. Fixed so that estimates do not
# depend on how blocks are distributed over workers.
BLOCK_SIZE = 4096


@dataclass(frozen=True)
class PhysicalParams:
    """Hardware parameters shared by every node and channel.

    Attributes:
        fidelity: Fidelity of freshly generated link states, in (0.25, 1].
        coherence_time: Memory coherence time in seconds (``math.inf`` for
            perfect memories).
        attenuation_db_per_km: Fiber attenuation.
        signal_speed_km_s: Signal speed in fiber.
    """

    fidelity: float = 0.96
    coherence_time: float = 10.0
    attenuation_db_per_km: float = 0.2
    signal_speed_km_s: float = 200_000.0

    def __post_init__(self) -> None:
        if not 0.25 < self.fidelity <= 1.0:
            raise ValueError(f"fidelity must lie in (0.25, 1], got {self.fidelity}")
        if not self.coherence_time > 0:
            raise ValueError(f"coherence_time must be > 0, got {self.coherence_time}")
        if self.attenuation_db_per_km < 0:
            raise ValueError("attenuation_db_per_km must be >= 0")
        if not self.signal_speed_km_s > 0:
            raise ValueError("signal_speed_km_s must be > 0")


@dataclass(frozen=True)
class ChainSpec:
    """A repeater chain: link lengths plus per-repeater memory quality.

    ``perfect_memory[k]`` refers to the repeater between link ``k`` and link
    ``k + 1``. End nodes measure immediately and carry no flag.
    """

    lengths: tuple[float, ...]
    perfect_memory: tuple[bool, ...] = ()

    def __post_init__(self) -> None:
        lengths = tuple(float(x) for x in self.lengths)
        object.__setattr__(self, "lengths", lengths)
        if not lengths:
            raise ValueError("a chain needs at least one link")
        if any(not x > 0 for x in lengths):
            raise ValueError(f"link lengths must be > 0, got {lengths}")
        flags = tuple(bool(f) for f in self.perfect_memory)
        if not flags:
            flags = (False,) * (len(lengths) - 1)
        if len(flags) != len(lengths) - 1:
            raise ValueError(
                f"expected {len(lengths) - 1} memory flags, got {len(flags)}"
            )
        object.__setattr__(self, "perfect_memory", flags)

    @property
    def n_links(self) -> int:
        return len(self.lengths)

    def canonical(self) -> "ChainSpec":
        """Return the orientation of this chain that sorts first.

        The model is symmetric under reversing the chain, so both
        orientations share one canonical form (and one random stream).
        """
        rev = ChainSpec(self.lengths[::-1], self.perfect_memory[::-1])
        if (rev.lengths, rev.perfect_memory) < (self.lengths, self.perfect_memory):
            return rev
        return self

    def encode(self) -> bytes:
        return struct.pack(
            f"<{len(self.lengths)}d{len(self.perfect_memory)}?",
            *self.lengths,
            *self.perfect_memory,
        )


@dataclass(frozen=True)
class SkrEstimate:
    """Result of one Monte-Carlo estimate.

    ``stderr_hz`` is the delta-method standard error of the ratio
    estimator; it is exactly 0 when every sample has zero key fraction.
    """

    skr_hz: float
    n_samples: int
    total_sim_time: float
    sum_skf: float = 0.0
    stderr_hz: float = 0.0


class QueryCounter:
    """Thread-safe monotone counter of SKR estimator calls."""

    def __init__(self) -> None:
        self._count = 0
        self._lock = threading.Lock()

    @property
    def count(self) -> int:
        return self._count

    def increment(self) -> int:
        with self._lock:
            self._count += 1
            return self._count

    def __repr__(self) -> str:
        return f"QueryCounter(count={self._count})"


def attenuation_success_prob(length: float, attenuation: float = 0.2) -> float:
    """Probability that one attempt over ``length`` km of fiber succeeds."""
    if length < 0:
        raise ValueError("length must be >= 0")
    return 10.0 ** (-attenuation * length / 10.0)


def attempt_duration(lengths: Sequence[float], signal_speed: float = 200_000.0) -> float:
    """Synchronized attempt duration: the longest link sets the clock."""
    if len(lengths) == 0:
        raise ValueError("lengths must be nonempty")
    if any(not x > 0 for x in lengths):
        raise ValueError("lengths must be > 0")
    return max(lengths) / signal_speed


def initial_werner(fidelity: float) -> float:
    """Werner parameter of a freshly generated link, ``(4F - 1) / 3``."""
    if not 0.25 < fidelity <= 1.0:
        raise ValueError(f"fidelity must lie in (0.25, 1], got {fidelity}")
    return (4.0 * fidelity - 1.0) / 3.0


def binary_entropy(x):
    """Binary entropy in bits; accepts scalars or arrays, h(0) = h(1) = 0."""
    arr = np.asarray(x, dtype=float)
    if np.any((arr < 0) | (arr > 1)) or np.any(np.isnan(arr)):
        raise ValueError("binary entropy is defined on [0, 1]")
    inner = (arr > 0) & (arr < 1)
    safe = np.where(inner, arr, 0.5)
    h = np.where(inner, -safe * np.log2(safe) - (1 - safe) * np.log2(1 - safe), 0.0)
    if h.ndim == 0:
        return float(h)
    return h


@lru_cache(maxsize=None)
def qber_threshold(tol: float = 1e-9) -> float:
    """QBER at which the BBM92 key fraction vanishes: root of h(Q) = 1/2."""
    lo, hi = 0.0, 0.5
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if binary_entropy(mid) < 0.5:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def werner_threshold() -> float:
    """Werner parameter at or below which no key can be extracted."""
    return 1.0 - 2.0 * qber_threshold()


def skf_from_werner(w):
    """Secret-key fraction ``max(0, 1 - 2 h((1 - w) / 2))`` of a Werner state.

    The floor is exact: at or below the threshold the result is 0.0, never a
    tiny positive residue.
    """
    arr = np.asarray(w, dtype=float)
    if np.any((arr < 0) | (arr > 1)):
        raise ValueError("Werner parameter must lie in [0, 1]")
    above = arr > werner_threshold()
    skf = np.where(above, 1.0 - 2.0 * binary_entropy((1.0 - arr) / 2.0), 0.0)
    skf = np.maximum(skf, 0.0)
    if skf.ndim == 0:
        return float(skf)
    return skf


def max_links(fidelity: float) -> float:
    """Real-valued link count N* from which every chain has zero SKR.

    Raises:
        ValueError: for ``fidelity == 1`` where no finite threshold exists.
    """
    w0 = initial_werner(fidelity)
    if w0 >= 1.0:
        raise ValueError("max_links is undefined for fidelity 1 (no link limit)")
    return math.log(werner_threshold()) / math.log(w0)


def link_limit(fidelity: float) -> float:
    """Like :func:`max_links` but returns ``math.inf`` for perfect links."""
    return math.inf if fidelity >= 1.0 else max_links(fidelity)


def sample_geometric(p: float, rng: np.random.Generator, size=None):
    """Number of attempts until first success, by inversion.

    ``X = ceil(ln(1 - U) / ln(1 - p))`` with ``U`` uniform on [0, 1).
    """
    if not 0 < p <= 1:
        raise ValueError(f"success probability must lie in (0, 1], got {p}")
    if p == 1.0:
        return 1 if size is None else np.ones(size, dtype=np.int64)
    u = rng.random(size)
    x = np.ceil(np.log1p(-u) / math.log1p(-p))
    x = np.maximum(x, 1.0).astype(np.int64)
    return int(x) if size is None else x


def _skf_unchecked(w: np.ndarray) -> np.ndarray:
    q = np.clip(0.5 * (1.0 - w), 1e-300, 0.5)
    h = -q * np.log2(q) - (1.0 - q) * np.log2(1.0 - q)
    return np.where(w > werner_threshold(), np.maximum(1.0 - 2.0 * h, 0.0), 0.0)


def _block_sums(
    key: int,
    block: int,
    m: int,
    log_fail: np.ndarray,
    t_att: float,
    coherence_time: float,
    w0_pow: float,
    noisy: np.ndarray,
) -> tuple[float, float, float, float, float]:
    rng = np.random.Generator(np.random.Philox(key=key, counter=[0, 0, 0, block]))
    n_links = log_fail.shape[0]
    u = rng.random((m, n_links))
    with np.errstate(divide="ignore"):
        # log_fail == -inf encodes p == 1: one attempt always suffices
        x = np.ceil(np.log1p(-u) / log_fail)
    np.maximum(x, 1.0, out=x)
    rounds = x.max(axis=1)
    if n_links > 1 and math.isfinite(coherence_time) and noisy.any():
        waits = np.abs(np.diff(x, axis=1))[:, noisy].sum(axis=1)
        w = w0_pow * np.exp(-waits * (t_att / coherence_time))
    else:
        w = np.full(m, w0_pow)
    skf = _skf_unchecked(w)
    dur = t_att * rounds
    return (
        float(skf.sum()),
        float(dur.sum()),
        float(np.dot(skf, skf)),
        float(np.dot(dur, dur)),
        float(np.dot(skf, dur)),
    )


def stream_key(seed: int, chain: ChainSpec) -> int:
    """64-bit stream key for ``chain`` under run seed ``seed``.

    Only the link lengths enter the key: chains that differ in memory flags
    see the same attempt counts, so perfect memories can only raise the rate.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(struct.pack("<Q", seed & 0xFFFFFFFFFFFFFFFF))
    h.update(struct.pack(f"<{chain.n_links}d", *chain.lengths))
    return int.from_bytes(h.digest(), "little")


def simulate_skr(
    chain: ChainSpec,
    params: PhysicalParams,
    n_samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    counter: Optional[QueryCounter] = None,
    workers: int = 1,
) -> SkrEstimate:
    """Monte-Carlo secret-key rate of a swap-ASAP chain.

    Sample ``i`` is drawn from the Philox stream keyed by ``seed`` at block
    ``i // BLOCK_SIZE``, so the result is bit-identical for any ``workers``.

    Args:
        chain: Link lengths and memory flags.
        params: Physical parameters.
        n_samples: Number of delivered pairs to simulate.
        seed: Stream key (use :func:`stream_key` for chain-matched seeds).
        counter: Incremented once per call when given.
        workers: Threads used to evaluate sample blocks.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if counter is not None:
        counter.increment()

    lengths = np.asarray(chain.lengths)
    n_links = chain.n_links
    t_att = attempt_duration(chain.lengths, params.signal_speed_km_s)
    w0 = initial_werner(params.fidelity)
    p = 10.0 ** (-params.attenuation_db_per_km * lengths / 10.0)
    with np.errstate(divide="ignore"):
        log_fail = np.log1p(-p)
    noisy = ~np.asarray(chain.perfect_memory, dtype=bool)
    w0_pow = w0**n_links

    blocks = [
        (b, min(BLOCK_SIZE, n_samples - b * BLOCK_SIZE))
        for b in range(math.ceil(n_samples / BLOCK_SIZE))
    ]

    def run(block: tuple[int, int]):
        return _block_sums(
            seed, block[0], block[1], log_fail, t_att,
            params.coherence_time, w0_pow, noisy,
        )

    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(b) for b in blocks]

    s_skf = s_dur = s_skf2 = s_dur2 = s_cross = 0.0
    for a, b, c, d, e in parts:
        s_skf += a
        s_dur += b
        s_skf2 += c
        s_dur2 += d
        s_cross += e

    skr = s_skf / s_dur
    n = n_samples
    mean_dur = s_dur / n
    var = (s_skf2 - 2 * skr * s_cross + skr * skr * s_dur2) / n
    stderr = math.sqrt(max(var, 0.0) / n) / mean_dur
    return SkrEstimate(
        skr_hz=skr,
        n_samples=n_samples,
        total_sim_time=s_dur,
        sum_skf=s_skf,
        stderr_hz=stderr,
    )


@dataclass
class SkrEstimator:
    """The costed oracle searched by every algorithm.

    Every call to :meth:`estimate` counts as one query. Seeds are matched:
    the stream for a chain is derived from ``(seed, canonical chain)``, so
    re-evaluating a chain (in either orientation) returns the same value.
    Results are memoized in ``cache``; several estimators with identical
    settings may share one cache dict while keeping separate counters.
    """

    params: PhysicalParams = field(default_factory=PhysicalParams)
    n_samples: int = DEFAULT_SAMPLES
    seed: int = 0
    counter: QueryCounter = field(default_factory=QueryCounter)
    cache: Optional[dict] = field(default_factory=dict)
    workers: int = 1

    @property
    def queries(self) -> int:
        return self.counter.count

    def fork(self) -> "SkrEstimator":
        """Same settings and cache, fresh counter."""
        return SkrEstimator(
            self.params, self.n_samples, self.seed, QueryCounter(), self.cache,
            self.workers,
        )

    def estimate(
        self,
        lengths: Sequence[float],
        perfect_memory: Optional[Sequence[bool]] = None,
    ) -> SkrEstimate:
        chain = ChainSpec(tuple(lengths), tuple(perfect_memory or ()))
        chain = chain.canonical()
        self.counter.increment()
        key = (self.params, self.n_samples, self.seed, chain.lengths, chain.perfect_memory)
        if self.cache is not None:
            hit = self.cache.get(key)
            if hit is not None:
                return hit
        est = simulate_skr(
            chain, self.params, self.n_samples, stream_key(self.seed, chain),
            workers=self.workers,
        )
        if self.cache is not None:
            self.cache[key] = est
        return est

    def skr(
        self,
        lengths: Sequence[float],
        perfect_memory: Optional[Sequence[bool]] = None,
    ) -> float:
        return self.estimate(lengths, perfect_memory).skr_hz
