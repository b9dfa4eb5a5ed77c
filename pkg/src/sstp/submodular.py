"""Greedy per-bucket selection on a cosine-similarity gain.

The gain of an unselected candidate j is the sum of its cosine similarities
to the already-selected samples minus the sum over the still-unselected rest
of the bucket.  Greedily taking the argmin therefore starts from the most
"redundant within the bucket" sample and keeps pulling the selection away
from what is already covered.

Both sums collapse onto two cached per-candidate quantities: total_sim[j]
(similarity to the whole bucket, excluding self) and sel_sim[j] (similarity
to the current selection), giving

    P(j) = 2 * sel_sim[j] - total_sim[j]

so each greedy step costs one similarity row instead of a full re-scan.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError

EPS_NORM = 1e-12  # zero vectors get similarity ~0 instead of NaN

_TOTAL_SIM_BLOCK = 256  # rows per pass; keeps memory O(block * n)


def cosine_sim(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity with epsilon-guarded norms."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ContractError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = max(float(np.linalg.norm(a)), EPS_NORM)
    nb = max(float(np.linalg.norm(b)), EPS_NORM)
    return float(a @ b) / (na * nb)


class BucketSelectionState:
    """Incremental scores for one bucket's greedy selection.

    ``include_self`` switches the unselected sum to include i = j; the two
    conventions shift every nonzero candidate's gain by the same constant,
    so the greedy sequence is unchanged (default: exclude).
    """

    def __init__(self, features: np.ndarray, include_self: bool = False):
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2:
            raise ContractError(f"features must be (n, dim), got shape {features.shape}")
        self.n = features.shape[0]
        self.include_self = include_self
        norms = np.linalg.norm(features, axis=1)
        self.norms = norms
        self.unit = features / np.maximum(norms, EPS_NORM)[:, None]
        # Exactly 1 for any vector longer than the guard, so the include-self
        # convention shifts tied gains by exactly the same constant.
        self.self_sim = np.where(
            norms > EPS_NORM, 1.0, np.einsum("ij,ij->i", self.unit, self.unit)
        )
        self.total_sim = self._total_sim()
        self.sel_sim = np.zeros(self.n)
        self.selected: list[int] = []
        self._is_selected = np.zeros(self.n, dtype=bool)

    def _total_sim(self) -> np.ndarray:
        # Streamed in row blocks; the n x n similarity matrix never exists.
        # The diagonal is zeroed before summing (not subtracted afterwards)
        # so that symmetric candidates end up with bitwise-equal totals and
        # tie-breaking matches a scalar re-evaluation exactly.
        total = np.zeros(self.n)
        for start in range(0, self.n, _TOTAL_SIM_BLOCK):
            rows = self.unit[start : start + _TOTAL_SIM_BLOCK] @ self.unit.T
            for i in range(rows.shape[0]):
                rows[i, start + i] = 0.0
            total[start : start + _TOTAL_SIM_BLOCK] = rows.sum(axis=1)
        return total

    def gains(self) -> np.ndarray:
        p = 2.0 * self.sel_sim - self.total_sim
        if self.include_self:
            p = p - self.self_sim
        return p

    def gain(self, j: int) -> float:
        if self._is_selected[j]:
            raise ContractError(f"candidate {j} is already selected")
        return float(self.gains()[j])

    def add(self, j: int) -> None:
        if self._is_selected[j]:
            raise ContractError(f"candidate {j} is already selected")
        self._is_selected[j] = True
        self.selected.append(j)
        self.sel_sim += self.unit @ self.unit[j]

    def argmin_unselected(self) -> int:
        p = self.gains()
        p[self._is_selected] = np.inf
        return int(np.argmin(p))  # first occurrence = lowest index on ties


def select_bucket(
    features: np.ndarray, n_select: int, include_self: bool = False
) -> list[int]:
    """Greedy argmin selection of ``n_select`` indices from one bucket.

    Returns indices in selection order; ties break to the lowest index.
    """
    features = np.asarray(features, dtype=np.float64)
    n = features.shape[0]
    if not (0 <= n_select <= n):
        raise ContractError(f"cannot select {n_select} of {n} candidates")
    if n_select == 0:
        return []
    state = BucketSelectionState(features, include_self=include_self)
    for _ in range(n_select):
        state.add(state.argmin_unselected())
    return list(state.selected)
