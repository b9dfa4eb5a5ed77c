"""Density partitioning, reverse-order dynamic budgets, and subset assembly.

Buckets are half-open density ranges [rho_min + (k-1)*tau, rho_min + k*tau)
for k = 1..K; empty buckets are kept so that k always means the same range.
Budgets are handed out from the highest-density bucket downward: bucket k
gets floor(remaining / k), capped at its size, and whatever the floors leave
over lands on bucket 1.  High-density buckets are small in long-tail data,
so they are usually kept whole while the low-density mass absorbs the cut.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .errors import ContractError, DataFormatError
from .features import FeatureSet
from .submodular import select_bucket as select_bucket_greedy


@dataclass(frozen=True)
class Bucket:
    k: int  # 1-based index
    lo: int  # inclusive
    hi: int  # exclusive
    member_ids: tuple[str, ...]

    @property
    def size(self) -> int:
        return len(self.member_ids)


@dataclass(frozen=True)
class PartitionPlan:
    tau: int
    rho_min: int
    buckets: tuple[Bucket, ...]

    @property
    def num_buckets(self) -> int:
        return len(self.buckets)

    @property
    def total(self) -> int:
        return sum(b.size for b in self.buckets)


@dataclass(frozen=True)
class BudgetPlan:
    alpha: float
    total_budget: int
    per_bucket: tuple[tuple[int, int], ...]  # (k, n_k), ascending k

    def quota(self, k: int) -> int:
        for kk, n in self.per_bucket:
            if kk == k:
                return n
        raise ContractError(f"no budget entry for bucket {k}")


def partition_pairs(pairs: Sequence[tuple[str, int]], tau: int) -> PartitionPlan:
    """Partition (scene_id, density) pairs; input order is kept per bucket."""
    if tau < 1:
        raise ContractError(f"tau must be >= 1, got {tau}")
    if not pairs:
        raise ContractError("cannot partition an empty collection")
    densities = [d for _, d in pairs]
    rho_min, rho_max = min(densities), max(densities)
    num_buckets = math.ceil((rho_max - rho_min + 1) / tau)
    members: list[list[str]] = [[] for _ in range(num_buckets)]
    for scene_id, d in pairs:
        members[(d - rho_min) // tau].append(scene_id)
    buckets = tuple(
        Bucket(k, rho_min + (k - 1) * tau, rho_min + k * tau, tuple(members[k - 1]))
        for k in range(1, num_buckets + 1)
    )
    return PartitionPlan(tau, rho_min, buckets)


def partition(features: FeatureSet, tau: int) -> PartitionPlan:
    return partition_pairs([(r.scene_id, r.density) for r in features.records], tau)


def total_budget(alpha: float, size: int) -> int:
    """floor(alpha * size) with exact decimal arithmetic, so 0.3 * 10 is 3."""
    if not (0 < alpha <= 1):
        raise ContractError(f"alpha must be in (0, 1], got {alpha}")
    return math.floor(Fraction(str(alpha)) * size)


def dynamic_budget(plan: PartitionPlan, alpha: float) -> BudgetPlan:
    """Per-bucket quotas, computed from bucket K down to bucket 1.

    A budget that covers the whole collection keeps every bucket intact; the
    reverse-order floor rule only arbitrates genuine scarcity.
    """
    sizes = {b.k: b.size for b in plan.buckets}
    budget = total_budget(alpha, plan.total)
    if budget >= plan.total:
        quotas = dict(sizes)
    else:
        quotas = {}
        remaining = budget
        for k in range(plan.num_buckets, 0, -1):
            n_k = min(sizes[k], remaining // k)
            quotas[k] = n_k
            remaining -= n_k
    per_bucket = tuple((k, quotas[k]) for k in range(1, plan.num_buckets + 1))
    return BudgetPlan(alpha, budget, per_bucket)


@dataclass(frozen=True)
class Provenance:
    method: str
    alpha: float
    tau: int
    seed: int
    feature_hash: str = "unknown"
    params_hash: str = "unknown"


@dataclass(frozen=True)
class SelectionResult:
    ids: tuple[str, ...]
    provenance: Provenance
    per_bucket: tuple[tuple[int, tuple[str, ...]], ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "ids", tuple(self.ids))
        if len(set(self.ids)) != len(self.ids):
            raise ContractError("selection contains duplicate scene ids")


def assemble(
    plan: PartitionPlan,
    budgets: BudgetPlan,
    per_bucket_selections: Mapping[int, Sequence[str]],
    provenance: Provenance,
) -> SelectionResult:
    """Union of per-bucket selections, validated against the budget plan.

    Buckets contribute in processing order (K down to 1), each in its own
    selection order.
    """
    ids: list[str] = []
    per_bucket = []
    for k in range(plan.num_buckets, 0, -1):
        bucket = plan.buckets[k - 1]
        quota = budgets.quota(k)
        sel = list(per_bucket_selections.get(k, []))
        if len(sel) != quota:
            raise ContractError(
                f"bucket {k}: selection has {len(sel)} ids, budget allows exactly {quota}"
            )
        if len(set(sel)) != len(sel):
            raise ContractError(f"bucket {k}: duplicate ids in selection")
        member_set = set(bucket.member_ids)
        stray = [s for s in sel if s not in member_set]
        if stray:
            raise ContractError(f"bucket {k}: ids not in bucket: {stray[:5]}")
        ids.extend(sel)
        per_bucket.append((k, tuple(sel)))
    return SelectionResult(tuple(ids), provenance, tuple(per_bucket))


# ---------------------------------------------------------------------------
# orchestration


def select_sstp(
    features: FeatureSet,
    alpha: float,
    tau: int,
    seed: int = 0,
    include_self: bool = False,
    feature_hash: str = "unknown",
    params_hash: str = "unknown",
) -> SelectionResult:
    """Full pipeline: partition, budget in reverse order, greedy per bucket.

    Buckets whose quota equals their size are taken whole without running
    the greedy loop; the seed only labels provenance (selection itself is
    deterministic given the features).
    """
    plan = partition(features, tau)
    budgets = dynamic_budget(plan, alpha)
    matrix = features.matrix()
    row_of = {r.scene_id: i for i, r in enumerate(features.records)}

    selections: dict[int, list[str]] = {}
    for k in range(plan.num_buckets, 0, -1):
        bucket = plan.buckets[k - 1]
        quota = budgets.quota(k)
        if quota == bucket.size:
            selections[k] = list(bucket.member_ids)
        elif quota == 0:
            selections[k] = []
        else:
            rows = matrix[[row_of[i] for i in bucket.member_ids]]
            order = select_bucket_greedy(rows, quota, include_self=include_self)
            selections[k] = [bucket.member_ids[i] for i in order]
    prov = Provenance("sstp", alpha, tau, seed, feature_hash, params_hash)
    return assemble(plan, budgets, selections, prov)


def select_baseline(
    features: FeatureSet,
    method: str,
    alpha: float,
    tau: int,
    seed: int = 0,
    per_bucket: bool = False,
    feature_hash: str = "unknown",
    params_hash: str = "unknown",
) -> SelectionResult:
    """Random / k-means / herding under the same budget.

    Global mode draws one budget over the whole collection (how these
    baselines are normally run); per-bucket mode reuses the dynamic budget
    plan so only the within-bucket strategy differs from the main method.
    """
    from .baselines import BaselineConfig, select_herding, select_kmeans, select_random

    config = BaselineConfig(method=method, seed=seed)
    config.validate()
    matrix = features.matrix()
    ids = features.scene_ids()

    def pick(sub_matrix, sub_ids, quota):
        if method == "random":
            return select_random(sub_ids, quota, seed)
        if method == "kmeans":
            return select_kmeans(sub_matrix, sub_ids, quota, config)
        return select_herding(sub_matrix, sub_ids, quota)

    if not per_bucket:
        budget = total_budget(alpha, len(ids))
        chosen = pick(matrix, ids, budget)
        prov = Provenance(method, alpha, tau, seed, feature_hash, params_hash)
        return SelectionResult(tuple(chosen), prov)

    plan = partition(features, tau)
    budgets = dynamic_budget(plan, alpha)
    row_of = {r.scene_id: i for i, r in enumerate(features.records)}
    selections = {}
    for k in range(plan.num_buckets, 0, -1):
        bucket = plan.buckets[k - 1]
        quota = budgets.quota(k)
        if quota == bucket.size:
            selections[k] = list(bucket.member_ids)
        else:
            rows = matrix[[row_of[i] for i in bucket.member_ids]]
            selections[k] = pick(rows, list(bucket.member_ids), quota)
    prov = Provenance(f"{method}-per-bucket", alpha, tau, seed, feature_hash, params_hash)
    return assemble(plan, budgets, selections, prov)


# ---------------------------------------------------------------------------
# selection file


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_selection(result: SelectionResult, path) -> None:
    p = result.provenance
    meta = (
        f"#META method={p.method} alpha={p.alpha!r} tau={p.tau} seed={p.seed} "
        f"features={p.feature_hash} params={p.params_hash}"
    )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(meta + "\n")
        for scene_id in result.ids:
            fh.write(scene_id + "\n")


def read_selection(path) -> SelectionResult:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("#META "):
        raise DataFormatError("line 1: missing '#META' header")
    fields = {}
    for tok in lines[0][len("#META "):].split():
        if "=" not in tok:
            raise DataFormatError(f"line 1: bad meta token {tok!r}")
        key, value = tok.split("=", 1)
        fields[key] = value
    try:
        prov = Provenance(
            method=fields["method"],
            alpha=float(fields["alpha"]),
            tau=int(fields["tau"]),
            seed=int(fields["seed"]),
            feature_hash=fields.get("features", "unknown"),
            params_hash=fields.get("params", "unknown"),
        )
    except (KeyError, ValueError) as e:
        raise DataFormatError(f"line 1: incomplete #META header ({e})") from None
    ids = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            raise DataFormatError(f"line {lineno}: blank line")
        ids.append(line)
    return SelectionResult(tuple(ids), prov)
