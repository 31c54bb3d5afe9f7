"""System-level latency and area evaluation, plus approximate latency models.

The correct latency of a kernel is its own variant latency plus the latency
of its composition body, where sequential children add, parallel children
take the maximum, loops multiply by trip count, and a call contributes
multiplicity times the callee's total.

Area is accounted per *kernel*: hardware is instantiated once per kernel and
shared by all call sites, so a configuration's area is the sum of the chosen
variant areas over distinct kernels, regardless of call multiplicity.

Besides the correct model, a catalog of systematically wrong latency
formulations is provided. Each mirrors a plausible misreading of the
composition semantics (ignoring everything but the top, ignoring structure,
serializing parallel sections, or keeping only the slowest child), so
optimizers can be driven with a wrong objective on purpose and their choices
compared against ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable

from .design import (
    Call,
    CompositionNode,
    Configuration,
    Design,
    Loop,
    Par,
    Seq,
    direct_callees,
    enumerate_configurations,
    tenths_to_area,
)
from .errors import UnsupportedModel


class LatencyModelKind(Enum):
    CORRECT = "correct"
    TOP_ONLY = "top-only"
    SUM_ALL = "sum-all"
    SUM_WITH_MULTIPLIERS = "sum-mult"
    TOP_PLUS_MAX_CHILDREN = "top-plus-max"


@dataclass(frozen=True)
class EvalResult:
    latency: int
    area_tenths: int

    @property
    def area(self) -> float:
        return tenths_to_area(self.area_tenths)


SelfLatency = Callable[[str], int]


def _variant_latency(design: Design, configuration: Configuration) -> SelfLatency:
    return lambda kid: design.kernels[kid].variants[configuration[kid]].latency


def eval_latency_given(design: Design, self_latency: SelfLatency) -> int:
    """Correct latency with per-kernel self-latencies supplied by a callable."""
    memo: dict[str, int] = {}

    def kernel_total(kid: str) -> int:
        if kid not in memo:
            kernel = design.kernels[kid]
            total = self_latency(kid)
            if kernel.body is not None:
                total += node_latency(kernel.body)
            memo[kid] = total
        return memo[kid]

    def node_latency(node: CompositionNode) -> int:
        if isinstance(node, Call):
            return node.multiplicity * kernel_total(node.kernel)
        if isinstance(node, Seq):
            return sum(node_latency(c) for c in node.children)
        if isinstance(node, Par):
            return max(node_latency(c) for c in node.children)
        if isinstance(node, Loop):
            return node.trip_count * node_latency(node.child)
        raise TypeError(f"not a composition node: {node!r}")

    return kernel_total(design.top)


def _sequentialized_given(design: Design, self_latency: SelfLatency) -> int:
    # Same recursion as the correct model except parallel children are summed,
    # which is how the composition would behave as sequential software.
    memo: dict[str, int] = {}

    def kernel_total(kid: str) -> int:
        if kid not in memo:
            kernel = design.kernels[kid]
            total = self_latency(kid)
            if kernel.body is not None:
                total += node_latency(kernel.body)
            memo[kid] = total
        return memo[kid]

    def node_latency(node: CompositionNode) -> int:
        if isinstance(node, Call):
            return node.multiplicity * kernel_total(node.kernel)
        if isinstance(node, (Seq, Par)):
            return sum(node_latency(c) for c in node.children)
        if isinstance(node, Loop):
            return node.trip_count * node_latency(node.child)
        raise TypeError(f"not a composition node: {node!r}")

    return kernel_total(design.top)


def _top_plus_max_given(design: Design, self_latency: SelfLatency, include_top: bool) -> int:
    # Keeps only one level-by-level "slowest child" chain; every sibling's
    # contribution except the largest is dropped.
    memo: dict[str, int] = {}

    def total(kid: str) -> int:
        if kid not in memo:
            children = direct_callees(design.kernels[kid])
            child_max = max((total(c) for c in children), default=0)
            own = self_latency(kid)
            memo[kid] = max(own, child_max) if include_top else own + child_max
        return memo[kid]

    return total(design.top)


def eval_faulty_latency_given(
    kind: LatencyModelKind,
    design: Design,
    self_latency: SelfLatency,
    include_top_in_max: bool = False,
) -> int:
    if kind is LatencyModelKind.CORRECT:
        return eval_latency_given(design, self_latency)
    if kind is LatencyModelKind.TOP_ONLY:
        return self_latency(design.top)
    if kind is LatencyModelKind.SUM_ALL:
        return sum(self_latency(kid) for kid in sorted(design.kernels))
    if kind is LatencyModelKind.SUM_WITH_MULTIPLIERS:
        return _sequentialized_given(design, self_latency)
    if kind is LatencyModelKind.TOP_PLUS_MAX_CHILDREN:
        return _top_plus_max_given(design, self_latency, include_top_in_max)
    raise UnsupportedModel(f"unknown latency model {kind!r}")


def eval_latency(design: Design, configuration: Configuration) -> int:
    """Correct system latency of the design under the given configuration."""
    return eval_latency_given(design, _variant_latency(design, configuration))


def eval_faulty_latency(
    kind: LatencyModelKind,
    design: Design,
    configuration: Configuration,
    include_top_in_max: bool = False,
) -> int:
    """Latency as predicted by one of the approximate models."""
    return eval_faulty_latency_given(
        kind, design, _variant_latency(design, configuration), include_top_in_max
    )


def eval_area(design: Design, configuration: Configuration) -> int:
    """Total area in tenths: one instance per kernel, shared across call sites."""
    return sum(
        design.kernels[kid].variants[configuration[kid]].area_tenths
        for kid in sorted(design.kernels)
    )


def evaluate(design: Design, configuration: Configuration) -> EvalResult:
    return EvalResult(
        latency=eval_latency(design, configuration),
        area_tenths=eval_area(design, configuration),
    )


def par_node_values(design: Design, configuration: Configuration) -> dict[str, int]:
    """Realized value (max over children) of every Par node, keyed by node path."""
    self_latency = _variant_latency(design, configuration)
    values: dict[str, int] = {}
    memo: dict[str, int] = {}

    def kernel_total(kid: str) -> int:
        if kid not in memo:
            kernel = design.kernels[kid]
            total = self_latency(kid)
            if kernel.body is not None:
                total += node_latency(kernel.body, f"{kid}/body")
            memo[kid] = total
        return memo[kid]

    def node_latency(node: CompositionNode, path: str) -> int:
        if isinstance(node, Call):
            return node.multiplicity * kernel_total(node.kernel)
        if isinstance(node, Seq):
            return sum(node_latency(c, f"{path}/{i}") for i, c in enumerate(node.children))
        if isinstance(node, Par):
            value = max(node_latency(c, f"{path}/{i}") for i, c in enumerate(node.children))
            values[path] = value
            return value
        if isinstance(node, Loop):
            return node.trip_count * node_latency(node.child, f"{path}/child")
        raise TypeError(f"not a composition node: {node!r}")

    kernel_total(design.top)
    # Visit any kernels not on the top's evaluation path (shared bodies are
    # memoized, so this only adds unreached ones; valid designs have none).
    for kid in sorted(design.kernels):
        kernel_total(kid)
    return values


@dataclass(frozen=True)
class OracleReport:
    """Exhaustive-enumeration optimum under the correct model.

    ``best_feasible`` is the latency-optimal configuration whose area fits the
    target (None when nothing fits); ``min_area`` is the configuration with
    the smallest area outright. Ties break toward smaller area (respectively
    latency), then lexicographically smaller configuration.
    """

    best_feasible: tuple[Configuration, EvalResult] | None
    min_area: tuple[Configuration, EvalResult]


def brute_force_optimum(
    design: Design, area_target_tenths: int, cap: int | None = None
) -> OracleReport:
    best_feasible: tuple[Configuration, EvalResult] | None = None
    best_feasible_key: tuple[int, int] | None = None
    min_area: tuple[Configuration, EvalResult] | None = None
    min_area_key: tuple[int, int] | None = None

    kwargs = {} if cap is None else {"cap": cap}
    for config in enumerate_configurations(design, **kwargs):
        result = evaluate(design, config)
        area_key = (result.area_tenths, result.latency)
        if min_area_key is None or area_key < min_area_key:
            min_area_key, min_area = area_key, (config, result)
        if result.area_tenths <= area_target_tenths:
            lat_key = (result.latency, result.area_tenths)
            if best_feasible_key is None or lat_key < best_feasible_key:
                best_feasible_key, best_feasible = lat_key, (config, result)

    if min_area is None:
        raise ValueError("design has a kernel with no variants; nothing to enumerate")
    return OracleReport(best_feasible=best_feasible, min_area=min_area)
