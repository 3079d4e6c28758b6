"""Bit-width allocation: layer importance, the budgeted linear program, and
an exhaustive oracle for validating it.

The LP maximizes sum(importance * bits) under one budget (weight bytes or
BOPs) with box bounds on every free layer's bits. Because both objective and
constraint are linear with positive coefficients, the continuous optimum is
the fractional-knapsack greedy: fill every layer to the minimum, then raise
layers to the maximum in decreasing order of importance per unit cost; at
most one pivot layer ends up fractional. The returned integer configuration
floors that pivot, which can never exceed the budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SIZE_BUDGET = "model_size_bytes"
BOPS_BUDGET = "bops"

# Exhaustive search is exponential in free layers; keep the oracle honest.
MAX_BRUTE_FORCE_LAYERS = 8


class InfeasibleBudgetError(ValueError):
    """Budget below the cheapest admissible configuration."""

    def __init__(self, limit: float, minimum: float, kind: str):
        self.limit = limit
        self.minimum = minimum
        self.kind = kind
        super().__init__(
            f"budget {limit:g} ({kind}) below minimum achievable {minimum:g};"
            " raise the budget or lower the bit range"
        )


@dataclass(frozen=True)
class LayerProfile:
    layer_id: str
    param_count: int
    mac_count: int = 0
    pinned_bits: int | None = None

    def __post_init__(self):
        if self.param_count < 1:
            raise ValueError(f"{self.layer_id}: param_count must be >= 1")
        if self.mac_count < 0:
            raise ValueError(f"{self.layer_id}: mac_count must be >= 0")
        if self.pinned_bits is not None and self.pinned_bits < 1:
            raise ValueError(f"{self.layer_id}: pinned_bits must be >= 1")


@dataclass(frozen=True)
class ImportanceVector:
    theta: list[float]
    beta: float
    alpha: list[float]


@dataclass(frozen=True)
class Budget:
    kind: str  # SIZE_BUDGET or BOPS_BUDGET
    limit: float
    activation_bits: int = 8

    def __post_init__(self):
        if self.kind not in (SIZE_BUDGET, BOPS_BUDGET):
            raise ValueError(f"unknown budget kind {self.kind!r}")
        if self.limit <= 0:
            raise ValueError("budget limit must be positive")
        if self.kind == BOPS_BUDGET and self.activation_bits < 1:
            raise ValueError("activation_bits must be >= 1 for a BOPs budget")


@dataclass(frozen=True)
class BitConfig:
    bits: list[int]
    objective: float
    relaxed_objective: float
    size_bytes: float
    bops: float
    feasible: bool
    layer_ids: list[str] = field(default_factory=list)


def importance(alpha: list[float], beta: float) -> ImportanceVector:
    """Map separability scores to positive layer importances exp(beta*alpha)."""
    alphas = [float(a) for a in alpha]
    if not all(math.isfinite(a) for a in alphas):
        raise ValueError("alpha values must be finite")
    try:
        theta = [math.exp(beta * a) for a in alphas]
    except OverflowError:
        raise ValueError("importance overflow: use a smaller beta") from None
    if not all(math.isfinite(t) for t in theta):
        raise ValueError("importance overflow: use a smaller beta")
    return ImportanceVector(theta=theta, beta=float(beta), alpha=alphas)


def model_size(bits: list[int], profiles: list[LayerProfile]) -> float:
    """Weight storage in bytes: sum of param_count * bits / 8 per layer."""
    if len(bits) != len(profiles):
        raise ValueError(f"{len(bits)} bit-widths for {len(profiles)} layers")
    return float(sum(p.param_count * b / 8 for p, b in zip(profiles, bits)))


def bops(bits: list[int], profiles: list[LayerProfile], activation_bits: int) -> float:
    """Bit operations: sum of mac_count * weight_bits * activation_bits."""
    if len(bits) != len(profiles):
        raise ValueError(f"{len(bits)} bit-widths for {len(profiles)} layers")
    return float(sum(p.mac_count * b * activation_bits for p, b in zip(profiles, bits)))


def _cost_per_bit(profiles: list[LayerProfile], budget: Budget) -> np.ndarray:
    if budget.kind == SIZE_BUDGET:
        return np.array([p.param_count / 8 for p in profiles], dtype=np.float64)
    return np.array([p.mac_count * budget.activation_bits for p in profiles], dtype=np.float64)


def _total_cost(bits, profiles: list[LayerProfile], budget: Budget) -> float:
    if budget.kind == SIZE_BUDGET:
        return model_size(list(bits), profiles)
    return bops(list(bits), profiles, budget.activation_bits)


def _check_inputs(theta: ImportanceVector, profiles: list[LayerProfile], bit_range) -> tuple[int, int]:
    if len(theta.theta) != len(profiles):
        raise ValueError(f"{len(theta.theta)} importances for {len(profiles)} layers")
    b_min, b_max = int(bit_range[0]), int(bit_range[1])
    if b_min > b_max:
        raise ValueError(f"bad bit range [{b_min}, {b_max}]")
    if b_min < 1:
        raise ValueError("bit range must start at >= 1")
    for p in profiles:
        if p.pinned_bits is not None and p.pinned_bits < b_min:
            raise ValueError(
                f"{p.layer_id}: pinned_bits {p.pinned_bits} below bit range minimum {b_min}"
            )
    return b_min, b_max


def solve_lp(
    theta: ImportanceVector,
    profiles: list[LayerProfile],
    budget: Budget,
    bit_range: tuple[int, int],
) -> BitConfig:
    """Solve the continuous bit-allocation LP and floor the pivot layer.

    Pinned layers keep their fixed bits, count against the budget, and are
    excluded from the decision variables. Equal importance densities break
    ties toward the lower layer index. ``relaxed_objective`` is the continuous
    optimum; ``objective`` re-scores the floored integer configuration.
    """
    b_min, b_max = _check_inputs(theta, profiles, bit_range)
    th = np.asarray(theta.theta, dtype=np.float64)
    cpb = _cost_per_bit(profiles, budget)

    bits = np.array(
        [p.pinned_bits if p.pinned_bits is not None else b_min for p in profiles],
        dtype=np.float64,
    )
    free = np.array([p.pinned_bits is None for p in profiles])

    # Running totals stay exact: size costs are multiples of 1/8 of an
    # integer, BOPs costs are integers, both representable in float64.
    spent = float(np.dot(cpb, bits))
    minimum = spent
    if minimum > budget.limit:
        raise InfeasibleBudgetError(budget.limit, minimum, budget.kind)

    with np.errstate(divide="ignore"):
        density = np.where(cpb > 0, th / np.where(cpb > 0, cpb, 1.0), np.inf)
    order = sorted(np.nonzero(free)[0].tolist(), key=lambda i: (-density[i], i))

    room = float(b_max - b_min)
    for i in order:
        if room == 0:
            break
        full_cost = room * cpb[i]
        if spent + full_cost <= budget.limit:
            bits[i] = b_max
            spent += full_cost
        else:
            if cpb[i] > 0:
                bits[i] = b_min + (budget.limit - spent) / cpb[i]
            break  # pivot layer exhausts the remaining budget

    relaxed_objective = float(np.dot(th, bits))
    int_bits = [
        int(p.pinned_bits) if p.pinned_bits is not None else int(math.floor(bits[i]))
        for i, p in enumerate(profiles)
    ]
    objective = float(np.dot(th, np.asarray(int_bits, dtype=np.float64)))
    return BitConfig(
        bits=int_bits,
        objective=objective,
        relaxed_objective=relaxed_objective,
        size_bytes=model_size(int_bits, profiles),
        bops=bops(int_bits, profiles, budget.activation_bits),
        feasible=True,
        layer_ids=[p.layer_id for p in profiles],
    )


def brute_force_allocation(
    theta: ImportanceVector,
    profiles: list[LayerProfile],
    budget: Budget,
    bit_range: tuple[int, int],
) -> BitConfig:
    """Exhaustively enumerate integer configurations; the validation oracle
    for solve_lp. Ties in the objective resolve to the lexicographically
    smallest bits vector."""
    b_min, b_max = _check_inputs(theta, profiles, bit_range)
    th = np.asarray(theta.theta, dtype=np.float64)
    cpb = _cost_per_bit(profiles, budget)
    free_idx = [i for i, p in enumerate(profiles) if p.pinned_bits is None]
    if len(free_idx) > MAX_BRUTE_FORCE_LAYERS:
        raise ValueError(
            f"{len(free_idx)} free layers exceeds brute-force limit {MAX_BRUTE_FORCE_LAYERS}"
        )

    pinned_bits = np.array(
        [p.pinned_bits if p.pinned_bits is not None else 0 for p in profiles], dtype=np.float64
    )
    pinned_cost = float(np.dot(cpb, pinned_bits))
    pinned_obj = float(np.dot(th, pinned_bits))

    if not free_idx:
        if pinned_cost > budget.limit:
            raise InfeasibleBudgetError(budget.limit, pinned_cost, budget.kind)
        int_bits = [int(b) for b in pinned_bits]
        return BitConfig(
            bits=int_bits,
            objective=pinned_obj,
            relaxed_objective=pinned_obj,
            size_bytes=model_size(int_bits, profiles),
            bops=bops(int_bits, profiles, budget.activation_bits),
            feasible=True,
            layer_ids=[p.layer_id for p in profiles],
        )

    levels = np.arange(b_min, b_max + 1, dtype=np.int16)
    grids = np.meshgrid(*([levels] * len(free_idx)), indexing="ij")
    # Rows come out in lexicographic order, so first-argmax is the tie-break.
    choices = np.stack(grids, axis=-1).reshape(-1, len(free_idx)).astype(np.float64)

    costs = pinned_cost + choices @ cpb[free_idx]
    objectives = pinned_obj + choices @ th[free_idx]
    feasible = costs <= budget.limit
    if not feasible.any():
        minimum = pinned_cost + float(np.dot(np.full(len(free_idx), b_min), cpb[free_idx]))
        raise InfeasibleBudgetError(budget.limit, minimum, budget.kind)

    best = int(np.argmax(np.where(feasible, objectives, -np.inf)))
    bits = pinned_bits.copy()
    bits[free_idx] = choices[best]
    int_bits = [int(b) for b in bits]
    obj = float(objectives[best])
    return BitConfig(
        bits=int_bits,
        objective=obj,
        relaxed_objective=obj,
        size_bytes=model_size(int_bits, profiles),
        bops=bops(int_bits, profiles, budget.activation_bits),
        feasible=True,
        layer_ids=[p.layer_id for p in profiles],
    )
