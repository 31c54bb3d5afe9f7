"""Shared test utilities: seeded generators for random designs.

Generated designs are always structurally valid: acyclic call graphs where
every kernel is reachable from the top, bodies that are well-formed
series-parallel trees, and non-empty variant lists with strictly improving
area/latency trade-offs (ascending area, descending latency).
"""

from __future__ import annotations

import random

from hlsdse.design import (
    Call,
    CompositionNode,
    Configuration,
    Design,
    Kernel,
    KernelSource,
    KernelVariant,
    Loop,
    Par,
    Seq,
)

_SOURCE = KernelSource(
    trip_count=0, body_latency=1, op_count=1, base_area_tenths=0, op_area_tenths=0
)


def random_variants(rng: random.Random, max_variants: int = 5) -> tuple[KernelVariant, ...]:
    """A proper trade-off curve: strictly ascending area, descending latency."""
    n = rng.randint(1, max_variants)
    areas = sorted(rng.sample(range(10, 500), n))
    latencies = sorted(rng.sample(range(1, 200), n), reverse=True)
    return tuple(
        KernelVariant(index=i, area_tenths=a, latency=l)
        for i, (a, l) in enumerate(zip(areas, latencies))
    )


def _random_body(
    rng: random.Random,
    callees: list[str],
    allow_par: bool,
    allow_loop: bool,
    max_multiplicity: int,
) -> CompositionNode:
    nodes: list[CompositionNode] = [
        Call(kid, rng.randint(1, max_multiplicity)) for kid in callees
    ]
    rng.shuffle(nodes)
    while len(nodes) > 1:
        take = min(len(nodes), rng.choice((2, 2, 3)))
        group = tuple(nodes.pop() for _ in range(take))
        combined: CompositionNode
        if allow_par and rng.random() < 0.5:
            combined = Par(group)
        else:
            combined = Seq(group)
        nodes.append(combined)
    body = nodes[0]
    if allow_loop and rng.random() < 0.3:
        body = Loop(rng.randint(1, 3), body)
    return body


def random_design(
    rng: random.Random,
    max_kernels: int = 6,
    max_variants: int = 5,
    allow_par: bool = True,
    allow_loop: bool = True,
    max_multiplicity: int = 3,
) -> Design:
    """Random valid design: kernel k0 is the top, every other kernel gets a
    caller with a smaller index, so the call graph is acyclic and connected."""
    count = rng.randint(1, max_kernels)
    ids = [f"k{i}" for i in range(count)]
    callees: dict[str, list[str]] = {kid: [] for kid in ids}
    for i in range(1, count):
        callees[ids[rng.randrange(i)]].append(ids[i])
    kernels = {}
    for kid in ids:
        body = (
            _random_body(rng, callees[kid], allow_par, allow_loop, max_multiplicity)
            if callees[kid]
            else None
        )
        kernels[kid] = Kernel(
            id=kid,
            source=_SOURCE,
            variants=random_variants(rng, max_variants),
            body=body,
        )
    return Design(kernels=kernels, top=ids[0])


def random_configuration(rng: random.Random, design: Design) -> Configuration:
    return Configuration.from_mapping(
        {kid: rng.randrange(len(k.variants)) for kid, k in design.kernels.items()}
    )
