"""Deterministic synthesizer stand-in: maps (source, pragma) to a cost point.

The cost model is the ground truth for the whole package, by construction.
For a source with trip count N, per-iteration latency L0, op count M, base
area A0 and per-op area a, under unroll factor U (a power of two, at most
max(N, 1)) and optional pipelining with initiation interval II:

    latency = L0                        if N == 0
            = ceil(N / U) * L0          if not pipelined
            = (ceil(N / U) - 1) * II + L0   if pipelined

    area    = A0 + a * M * U
            + ceil(10% of a * M * U)    if pipelined (control overhead,
                                        rounded up to a whole area unit)

Unrolling buys latency with area linearly; pipelining overlaps iterations at
a small area premium. All arithmetic is exact in integer tenths.
"""

from __future__ import annotations

from dataclasses import replace

from .design import KernelSource, KernelVariant, PragmaConfig
from .errors import InvalidPragma

DEFAULT_MAX_VARIANTS = 5


def valid_unroll_factors(source: KernelSource) -> tuple[int, ...]:
    """Powers of two from 1 up to max(trip_count, 1)."""
    limit = max(source.trip_count, 1)
    factors = []
    u = 1
    while u <= limit:
        factors.append(u)
        u *= 2
    return tuple(factors)


def _check_pragma(source: KernelSource, pragma: PragmaConfig) -> None:
    u = pragma.unroll
    if u < 1 or (u & (u - 1)) != 0:
        raise InvalidPragma(f"unroll factor {u} is not a power of two")
    if u > max(source.trip_count, 1):
        raise InvalidPragma(
            f"unroll factor {u} exceeds trip count {source.trip_count}"
        )
    if pragma.ii is not None and pragma.ii < 1:
        raise InvalidPragma(f"initiation interval {pragma.ii} < 1")


def synthesize(source: KernelSource, pragma: PragmaConfig) -> KernelVariant:
    """Cost point for one pragma configuration (variant index left at 0)."""
    _check_pragma(source, pragma)
    n, u = source.trip_count, pragma.unroll
    iterations = -(-n // u)  # ceil(N / U)

    if n == 0:
        latency = source.body_latency
    elif pragma.ii is not None:
        latency = (iterations - 1) * pragma.ii + source.body_latency
    else:
        latency = iterations * source.body_latency

    op_area = source.op_area_tenths * source.op_count * u
    area = source.base_area_tenths + op_area
    if pragma.ii is not None:
        # 10% control overhead, ceiling-rounded to whole area units.
        area += 10 * -(-op_area // 100)

    return KernelVariant(index=0, area_tenths=area, latency=latency, pragma=pragma)


def _pareto_front(points: list[KernelVariant]) -> list[KernelVariant]:
    # Prefer pipeline-off then smaller unroll when cost points tie exactly.
    ordered = sorted(
        points,
        key=lambda v: (v.area_tenths, v.latency, v.pragma.pipelined, v.pragma.unroll),
    )
    front: list[KernelVariant] = []
    best_latency: int | None = None
    for v in ordered:
        if best_latency is None or v.latency < best_latency:
            front.append(v)
            best_latency = v.latency
    return front


def _spread_indices(n: int, k: int) -> list[int]:
    # k indices over [0, n-1]: both extremes plus evenly spaced interior
    # points by rank (round half up), computed in integers.
    if k == 1:
        return [0]
    picked = []
    for i in range(k):
        picked.append((2 * i * (n - 1) + (k - 1)) // (2 * (k - 1)))
    return sorted(set(picked))


def generate_variants(
    source: KernelSource, max_variants: int = DEFAULT_MAX_VARIANTS
) -> tuple[KernelVariant, ...]:
    """Sweep pragmas, keep the Pareto front, and trim it to ``max_variants``.

    The sweep covers every valid unroll factor with pipelining off and on
    (II = 1). When the front is larger than ``max_variants``, the area
    extreme and the latency extreme are always kept, with the remainder
    evenly spaced by latency rank. The result is sorted by ascending area
    (hence strictly descending latency) and reindexed from 0.
    """
    if max_variants < 1:
        raise ValueError(f"max_variants must be >= 1, got {max_variants}")
    sweep = []
    for u in valid_unroll_factors(source):
        sweep.append(synthesize(source, PragmaConfig(unroll=u, ii=None)))
        sweep.append(synthesize(source, PragmaConfig(unroll=u, ii=1)))
    front = _pareto_front(sweep)
    if len(front) > max_variants:
        front = [front[i] for i in _spread_indices(len(front), max_variants)]
    return tuple(replace(v, index=i) for i, v in enumerate(front))
