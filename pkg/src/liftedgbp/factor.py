"""Dense log-space potentials.

A :class:`FactorTable` is an immutable pair ``(scope, log_table)`` where
``log_table`` is an ndarray whose axis ``i`` enumerates the states of
``scope[i]``. Flattening in C order gives the row-major layout used by model
files: the first scope variable is the most significant digit.

Beliefs, messages and factor potentials are all stored this way. Every
operation returns a new table.
"""

from __future__ import annotations

import json
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import CardinalityMismatch, NotABijection, ScopeNotContained, UnknownVariable

# log(x) is never allowed below this; keeps every table finite
LOG_FLOOR = -700.0


def clamp(log_values: np.ndarray) -> np.ndarray:
    return np.maximum(log_values, LOG_FLOOR)


def log_sum_exp(x: np.ndarray, axis=None) -> np.ndarray:
    """Lean log-sum-exp for finite inputs (the message-passing hot path).

    scipy's version validates and promotes its arguments on every call, which
    dominates the cost on the small tables GBP works with.
    """
    m = np.max(x, axis=axis, keepdims=True)
    out = np.log(np.sum(np.exp(x - m), axis=axis, keepdims=True)) + m
    if axis is None:
        return out.reshape(())[()]
    return np.squeeze(out, axis=axis)


class FactorTable:
    __slots__ = ("scope", "table")

    def __init__(self, scope: Sequence[Hashable], table) -> None:
        scope = tuple(scope)
        table = np.asarray(table, dtype=float)
        if table.ndim != len(scope):
            raise CardinalityMismatch(
                f"table has {table.ndim} axes but scope has {len(scope)} variables")
        if len(set(scope)) != len(scope):
            raise ValueError(f"duplicate variables in scope {scope}")
        self.scope = scope
        self.table = table

    # -- construction -----------------------------------------------------------

    @classmethod
    def from_log(cls, scope, cardinalities, log_values) -> "FactorTable":
        return cls(scope, np.asarray(log_values, dtype=float).reshape(tuple(cardinalities)))

    @classmethod
    def from_natural(cls, scope, cardinalities, values) -> "FactorTable":
        values = np.asarray(values, dtype=float)
        if np.any(values < 0):
            raise ValueError("natural-space values must be non-negative")
        with np.errstate(divide="ignore"):
            logs = np.log(values)
        return cls.from_log(scope, cardinalities, clamp(logs))

    @classmethod
    def ones(cls, scope, cardinalities) -> "FactorTable":
        return cls(scope, np.zeros(tuple(cardinalities)))

    @classmethod
    def uniform(cls, scope, cardinalities) -> "FactorTable":
        """Normalized constant table."""
        cards = tuple(cardinalities)
        size = int(np.prod(cards, dtype=np.int64)) if cards else 1
        return cls(scope, np.full(cards, -np.log(size)))

    @classmethod
    def scalar(cls, log_value: float) -> "FactorTable":
        return cls((), np.asarray(float(log_value)))

    # -- accessors --------------------------------------------------------------

    @property
    def cardinalities(self) -> tuple:
        return self.table.shape

    @property
    def log_values(self) -> np.ndarray:
        """Flat row-major view of the log table."""
        return self.table.reshape(-1)

    def natural(self) -> np.ndarray:
        return np.exp(self.table)

    def cardinality_of(self, var) -> int:
        return self.table.shape[self.scope.index(var)]

    def value(self, assignment: Mapping) -> float:
        """Natural-space value at a full assignment ``{var: state}``."""
        return float(np.exp(self.table[tuple(assignment[v] for v in self.scope)]))

    def __repr__(self) -> str:
        return f"FactorTable(scope={self.scope!r}, shape={self.table.shape})"

    # -- structural helpers -----------------------------------------------------

    def aligned(self, target_scope: Sequence[Hashable]) -> np.ndarray:
        """Return the log table transposed and reshaped to broadcast over ``target_scope``."""
        positions = []
        for v in self.scope:
            try:
                positions.append(target_scope.index(v))
            except ValueError:
                raise ScopeNotContained(f"{v!r} not in {target_scope!r}") from None
        order = np.argsort(positions)
        moved = self.table.transpose(order) if len(order) > 1 else self.table
        shape = [1] * len(target_scope)
        for p, v in zip(positions, self.scope):
            shape[p] = self.cardinality_of(v)
        return moved.reshape(shape)

    def reorder(self, scope: Sequence[Hashable]) -> "FactorTable":
        scope = tuple(scope)
        if set(scope) != set(self.scope) or len(scope) != len(self.scope):
            raise UnknownVariable(f"{scope!r} is not a permutation of {self.scope!r}")
        perm = [self.scope.index(v) for v in scope]
        return FactorTable(scope, self.table.transpose(perm))

    def _check_shared(self, other: "FactorTable") -> None:
        for v in set(self.scope) & set(other.scope):
            if self.cardinality_of(v) != other.cardinality_of(v):
                raise CardinalityMismatch(
                    f"variable {v!r}: {self.cardinality_of(v)} vs {other.cardinality_of(v)} states")

    # -- arithmetic -------------------------------------------------------------

    def multiply(self, other: "FactorTable") -> "FactorTable":
        self._check_shared(other)
        scope = self.scope + tuple(v for v in other.scope if v not in self.scope)
        if scope == self.scope:
            return FactorTable(scope, self.table + other.aligned(scope))
        extended = FactorTable.ones(scope, [
            self.cardinality_of(v) if v in self.scope else other.cardinality_of(v) for v in scope])
        return FactorTable(scope, extended.table + self.aligned(scope) + other.aligned(scope))

    def divide(self, den: "FactorTable") -> "FactorTable":
        if not set(den.scope) <= set(self.scope):
            raise ScopeNotContained(f"{den.scope!r} is not contained in {self.scope!r}")
        self._check_shared(den)
        out = clamp(self.table) - clamp(den.aligned(self.scope))
        return FactorTable(self.scope, clamp(out))

    def marginalize_sum(self, keep: Iterable[Hashable]) -> "FactorTable":
        keep = tuple(keep)
        for v in keep:
            if v not in self.scope:
                raise UnknownVariable(f"{v!r} not in scope {self.scope!r}")
        drop = tuple(i for i, v in enumerate(self.scope) if v not in keep)
        table = logsumexp(self.table, axis=drop) if drop else self.table
        remaining = tuple(v for v in self.scope if v in keep)
        return FactorTable(remaining, np.asarray(table)).reorder(keep)

    def rename(self, mapping: Mapping, target_cardinalities: Mapping | None = None) -> "FactorTable":
        """Relabel scope variables; data layout is untouched."""
        if set(mapping) != set(self.scope):
            raise NotABijection("mapping must be defined on exactly the scope")
        image = tuple(mapping[v] for v in self.scope)
        if len(set(image)) != len(image):
            raise NotABijection("mapping is not injective")
        if target_cardinalities is not None:
            for v, w in zip(self.scope, image):
                if w in target_cardinalities and target_cardinalities[w] != self.cardinality_of(v):
                    raise CardinalityMismatch(f"{v!r} -> {w!r} changes the state count")
        return FactorTable(image, self.table)

    def power(self, k: int) -> "FactorTable":
        if k < 0:
            raise ValueError("exponent must be non-negative")
        return FactorTable(self.scope, self.table * k)

    def normalize(self) -> "FactorTable":
        return FactorTable(self.scope, clamp(self.table - logsumexp(self.table)))

    def log_partition(self) -> float:
        return float(logsumexp(self.table))

    def damp(self, new: "FactorTable", damping: float) -> "FactorTable":
        """Geometric mix ``(1 - damping) * log self + damping * log new``."""
        if set(new.scope) != set(self.scope):
            raise UnknownVariable("damping requires identical scopes")
        new = new.reorder(self.scope)
        return FactorTable(self.scope, (1.0 - damping) * self.table + damping * new.table)

    def max_abs_diff(self, other: "FactorTable") -> float:
        other = other.reorder(self.scope)
        if not self.table.size:
            return 0.0
        return float(np.max(np.abs(self.table - other.table)))

    # -- export -----------------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "scope": [_json_var(v) for v in self.scope],
            "cardinalities": list(self.cardinalities),
            "values": self.natural().reshape(-1).tolist(),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _json_var(v):
    if isinstance(v, (str, int, float)):
        return v
    return str(v)


def product(tables: Iterable[FactorTable]) -> FactorTable:
    result = FactorTable.scalar(0.0)
    for t in tables:
        result = result.multiply(t)
    return result
