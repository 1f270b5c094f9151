"""Variables, factors and factor graphs.

A factor graph is a set of ``L`` binary variables together with factors,
each covering an ordered subset of the variables. Factors come in five
kinds:

``XOR``
    exactly one member is on.
``AtMostOne``
    at most one member is on.
``Budget``
    at most ``B`` members are on.
``Pair``
    two members with an interaction score ``r * z_1 * z_2``.
``SeqBudget``
    a linear chain over contiguous tokens with edge scores ``r`` and at most
    ``B`` members on.

Alignment variables of an ``L_P x L_H`` matching are flattened row-major:
variable ``i * L_H + j`` is the alignment of premise token ``i`` with
hypothesis token ``j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

XOR = "XOR"
AT_MOST_ONE = "AtMostOne"
BUDGET = "Budget"
PAIR = "Pair"
SEQ_BUDGET = "SeqBudget"

FACTOR_KINDS = (XOR, AT_MOST_ONE, BUDGET, PAIR, SEQ_BUDGET)
LOGIC_KINDS = (XOR, AT_MOST_ONE, BUDGET)

MATCHING_VARIANTS = ("XorAtMostOne", "AtMostOne2", "Budget")


class GraphError(ValueError):
    """Raised for malformed factors, graphs or graph descriptions."""


@dataclass(frozen=True)
class Factor:
    """A single factor over an ordered tuple of variable indices.

    ``budget`` is used by ``Budget`` and ``SeqBudget``; ``edge_scores`` holds
    the single interaction score of a ``Pair`` factor or the ``len(members) - 1``
    chain scores of a ``SeqBudget`` factor.
    """

    kind: str
    members: tuple[int, ...]
    budget: int | None = None
    edge_scores: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in FACTOR_KINDS:
            raise GraphError(f"unknown factor kind {self.kind!r}")
        members = tuple(int(m) for m in self.members)
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "edge_scores", tuple(float(r) for r in self.edge_scores))
        if not members:
            raise GraphError(f"{self.kind} factor needs at least one member")
        if len(set(members)) != len(members):
            raise GraphError(f"{self.kind} factor has repeated members {members}")
        if self.kind in (BUDGET, SEQ_BUDGET):
            if self.budget is None or int(self.budget) != self.budget:
                raise GraphError(f"{self.kind} factor needs an integer budget")
            lo = 1 if self.kind == BUDGET else 0
            if not lo <= self.budget <= len(members):
                raise GraphError(
                    f"{self.kind} budget {self.budget} outside [{lo}, {len(members)}]"
                )
        if self.kind == PAIR:
            if len(members) != 2:
                raise GraphError("Pair factor needs exactly 2 members")
            if len(self.edge_scores) != 1:
                raise GraphError("Pair factor needs one edge score")
        if self.kind == SEQ_BUDGET and len(self.edge_scores) != len(members) - 1:
            raise GraphError(
                f"SeqBudget over {len(members)} members needs {len(members) - 1} "
                f"edge scores, got {len(self.edge_scores)}"
            )
        if not all(math.isfinite(r) for r in self.edge_scores):
            raise GraphError("edge scores must be finite")

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def params(self) -> dict[str, Any]:
        if self.kind == BUDGET:
            return {"B": self.budget}
        if self.kind == PAIR:
            return {"r": self.edge_scores[0]}
        if self.kind == SEQ_BUDGET:
            return {"B": self.budget, "r": list(self.edge_scores)}
        return {}

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "members": list(self.members), "params": self.params}

    @classmethod
    def from_dict(cls, d: dict[str, Any], where: str = "factor") -> "Factor":
        if not isinstance(d, dict):
            raise GraphError(f"{where}: expected an object")
        for key in ("kind", "members"):
            if key not in d:
                raise GraphError(f"{where}: missing field {key!r}")
        params = d.get("params", {}) or {}
        if not isinstance(params, dict):
            raise GraphError(f"{where}.params: expected an object")
        kind = d["kind"]
        budget = params.get("B")
        r = params.get("r", ())
        if kind == PAIR:
            r = (r,) if not isinstance(r, (list, tuple)) else r
        try:
            return cls(kind, tuple(d["members"]), budget, tuple(r))
        except (TypeError, GraphError) as exc:
            raise GraphError(f"{where}: {exc}") from None


@dataclass(frozen=True)
class FactorGraph:
    """Binary variables plus the factors covering them."""

    num_variables: int
    factors: tuple[Factor, ...]
    degree: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        L = self.num_variables
        if L < 1:
            raise GraphError("a factor graph needs at least one variable")
        factors = tuple(self.factors)
        object.__setattr__(self, "factors", factors)
        degree = np.zeros(L, dtype=np.int64)
        for k, f in enumerate(factors):
            if min(f.members) < 0 or max(f.members) >= L:
                raise GraphError(f"factors[{k}]: member index outside [0, {L})")
            if f.kind == SEQ_BUDGET and f.members != tuple(range(f.members[0], f.members[0] + f.size)):
                raise GraphError(f"factors[{k}]: SeqBudget members must be contiguous and ordered")
            degree[list(f.members)] += 1
        if np.any(degree == 0):
            missing = np.flatnonzero(degree == 0).tolist()
            raise GraphError(f"variables {missing} are not covered by any factor")
        degree.setflags(write=False)
        object.__setattr__(self, "degree", degree)

    def to_dict(self) -> dict[str, Any]:
        return {
            "num_variables": self.num_variables,
            "factors": [f.to_dict() for f in self.factors],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "FactorGraph":
        if not isinstance(d, dict):
            raise GraphError("graph: expected an object")
        if "num_variables" not in d or "factors" not in d:
            raise GraphError("graph: needs 'num_variables' and 'factors'")
        L = d["num_variables"]
        if not isinstance(L, int) or isinstance(L, bool):
            raise GraphError("graph.num_variables: expected an integer")
        if not isinstance(d["factors"], list):
            raise GraphError("graph.factors: expected a list")
        factors = [Factor.from_dict(f, where=f"factors[{k}]") for k, f in enumerate(d["factors"])]
        return cls(L, tuple(factors))


def budget_from_percentage(length: int, budget_pct: float) -> int:
    """Smallest integer budget covering ``budget_pct`` percent of ``length``."""
    if not 0 < budget_pct <= 100:
        raise GraphError(f"budget percentage must be in (0, 100], got {budget_pct}")
    # round before ceil so that e.g. 20% of 20 is 4, not 5 from 4.000000000000001
    return max(1, min(length, math.ceil(round(budget_pct / 100 * length, 9))))


def build_highlight_graph(length: int, budget_pct: float, transition: float = 0.0) -> FactorGraph:
    """Single ``SeqBudget`` factor over ``length`` tokens.

    All ``length - 1`` edge scores equal ``transition``; the budget is
    ``ceil(budget_pct / 100 * length)``.
    """
    if length < 1:
        raise GraphError("length must be >= 1")
    if transition < 0 or not math.isfinite(transition):
        raise GraphError(f"transition score must be finite and non-negative, got {transition}")
    B = budget_from_percentage(length, budget_pct)
    factor = Factor(SEQ_BUDGET, tuple(range(length)), B, (float(transition),) * (length - 1))
    return FactorGraph(length, (factor,))


def parse_variant(variant: str | Sequence[Any], budget: int | None = None) -> tuple[str, int | None]:
    """Normalise a matching variant given as a name, ``"Budget(4)"`` or ``("Budget", 4)``."""
    if isinstance(variant, (tuple, list)):
        name, budget = variant[0], variant[1]
    else:
        name = str(variant)
        if name.startswith("Budget(") and name.endswith(")"):
            try:
                name, budget = "Budget", int(name[len("Budget("):-1])
            except ValueError:
                raise GraphError(f"cannot parse matching variant {variant!r}") from None
    if name not in MATCHING_VARIANTS:
        raise GraphError(f"unknown matching variant {name!r}; expected one of {MATCHING_VARIANTS}")
    if name == "Budget" and budget is None:
        raise GraphError("the Budget matching variant needs a budget B")
    return name, (int(budget) if name == "Budget" else None)


def build_matching_graph(
    n_premise: int, n_hypothesis: int, variant: str | Sequence[Any] = "XorAtMostOne", budget: int | None = None
) -> FactorGraph:
    """Factor graph over the ``n_premise * n_hypothesis`` alignment variables.

    ``XorAtMostOne``: one XOR per premise row, one AtMostOne per hypothesis
    column. ``AtMostOne2``: AtMostOne on rows and columns. ``Budget``:
    ``AtMostOne2`` plus a global Budget(B) factor.
    """
    if n_premise < 1 or n_hypothesis < 1:
        raise GraphError("both sequence lengths must be >= 1")
    name, B = parse_variant(variant, budget)
    L = n_premise * n_hypothesis
    if name == "Budget" and not 1 <= B <= L:
        raise GraphError(f"matching budget {B} outside [1, {L}]")
    if name == "XorAtMostOne" and n_premise > n_hypothesis:
        # every premise row needs its own hypothesis column
        raise GraphError(
            f"XorAtMostOne has no feasible matching for {n_premise} premise > {n_hypothesis} hypothesis tokens"
        )
    idx = np.arange(L).reshape(n_premise, n_hypothesis)
    row_kind = XOR if name == "XorAtMostOne" else AT_MOST_ONE
    factors = [Factor(row_kind, tuple(row.tolist())) for row in idx]
    factors += [Factor(AT_MOST_ONE, tuple(col.tolist())) for col in idx.T]
    if name == "Budget":
        factors.append(Factor(BUDGET, tuple(range(L)), B))
    return FactorGraph(L, tuple(factors))
