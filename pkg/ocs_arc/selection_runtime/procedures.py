"""
ocs_arc/selection_runtime/procedures.py
---------------------------------------

Selection procedures over a stream of p-values:

  - offline_bh        : Benjamini-Hochberg on a fixed batch
  - online_bh_step    : online BH thresholding (OCS-ARC); selections are
                        irrevocable, so R_1 ⊆ R_2 ⊆ ... by construction
  - ob_step           : online Bonferroni baseline, select t iff p_t <= q*gamma_t
  - repeated_cs_step  : offline BH re-run on the whole history each step;
                        the non-ARC baseline whose sets can shrink

Online BH state
~~~~~~~~~~~~~~~
Each index j carries the budget ratio p_j / (q * gamma_j), so that

    p_j <= k * q * gamma_j   <=>   ratio_j <= k

and with the ratios sorted (s_1 <= s_2 <= ...)

    k*_t = max{k : #{j : ratio_j <= k} >= k} = max{k : s_k <= k}.

Inserting a ratio can only lower s_k for every k, so k*_t never
decreases and only the range (k*_{t-1}, t] has to be searched. The
brute-force `recompute_online_bh` is kept as the reference.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, List, Optional, Sequence, Set, Tuple

import numpy as np
import pandas as pd

from .utils import InvalidInputError, _require, join_indices

log = logging.getLogger(__name__)


class Method(str, Enum):
    OCS_ARC = "ocs_arc"
    OB = "ob"
    REPEATED_CS = "repeated_cs"
    MOCS_ARC = "mocs_arc"


# ---------------------------------------------------------------------------
# Gamma sequence
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GammaSequence:
    """gamma_t = r^t * (1 - r) / r, t = 1, 2, ...; partial sums are 1 - r^T."""

    r: float

    def __post_init__(self) -> None:
        _require(0.0 < self.r < 1.0, f"decay coefficient r must lie in (0, 1), got {self.r}")

    def __call__(self, t: int) -> float:
        return gamma_at(self, t)

    def partial_sum(self, T: int) -> float:
        return float(sum(gamma_at(self, t) for t in range(1, int(T) + 1)))


def gamma_at(gs: GammaSequence, t: int) -> float:
    if int(t) != t or t < 1:
        raise InvalidInputError(f"timestep must be a positive integer, got {t}")
    r = gs.r
    return r ** int(t) * (1.0 - r) / r


def _budget_ratio(p: float, q: float, gamma: float) -> float:
    denom = q * gamma
    if denom > 0.0:
        return p / denom
    # gamma underflowed: only an exact zero p-value still fits any budget
    return 0.0 if p == 0.0 else float("inf")


def _check_p(p: float) -> float:
    p = float(p)
    _require(0.0 <= p <= 1.0, f"p-value must lie in [0, 1], got {p}")
    return p


# ---------------------------------------------------------------------------
# Offline BH and the repeated-offline baseline
# ---------------------------------------------------------------------------


def offline_bh(pvals: Sequence[float], q: float) -> Set[int]:
    """1-based indices selected by BH at level q."""
    p = np.asarray(pvals, dtype=float).reshape(-1)
    m = p.shape[0]
    if m == 0:
        return set()
    ordered = np.sort(p, kind="mergesort")
    thresholds = np.arange(1, m + 1) * q / m
    passing = np.nonzero(ordered <= thresholds)[0]
    if passing.size == 0:
        return set()
    k_star = int(passing[-1]) + 1
    return {int(j) + 1 for j in np.nonzero(p <= k_star * q / m)[0]}


def repeated_cs_step(history: Sequence[float], q: float) -> Set[int]:
    _require(len(history) > 0, "history must be non-empty")
    return offline_bh(history, q)


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Snapshot:
    t: int
    p_t: float
    gamma_t: float
    k_star: int
    newly_selected: Tuple[int, ...]
    cum_selected: int
    deselected: Tuple[int, ...] = ()


@dataclass
class SelectionTrajectory:
    snapshots: List[Snapshot] = field(default_factory=list)

    def append(self, snap: Snapshot) -> None:
        if self.snapshots:
            _require(snap.t == self.snapshots[-1].t + 1, "snapshots must be consecutive")
        self.snapshots.append(snap)

    def __len__(self) -> int:
        return len(self.snapshots)

    def sets(self) -> Iterator[frozenset]:
        """Replay R_1, R_2, ... from the recorded changes."""
        current: Set[int] = set()
        for snap in self.snapshots:
            current.difference_update(snap.deselected)
            current.update(snap.newly_selected)
            yield frozenset(current)

    def selected_at(self, t: int) -> frozenset:
        _require(1 <= t <= len(self.snapshots), f"t={t} outside trajectory of length {len(self)}")
        for i, s in enumerate(self.sets(), start=1):
            if i == t:
                return s
        raise AssertionError("unreachable")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "t": [s.t for s in self.snapshots],
                "p_t": [s.p_t for s in self.snapshots],
                "gamma_t": [s.gamma_t for s in self.snapshots],
                "k_star": [s.k_star for s in self.snapshots],
                "newly_selected": [join_indices(s.newly_selected) for s in self.snapshots],
                "cum_selected": [s.cum_selected for s in self.snapshots],
            }
        )


# ---------------------------------------------------------------------------
# Online BH (OCS-ARC) and online Bonferroni (OB)
# ---------------------------------------------------------------------------


@dataclass
class OnlineSelectionState:
    q: float
    gamma: GammaSequence
    pvals: List[float] = field(default_factory=list)
    gammas: List[float] = field(default_factory=list)
    k_star: int = 0
    selected: List[int] = field(default_factory=list)  # in order of selection
    _selected_set: Set[int] = field(default_factory=set, repr=False)
    _sorted_ratios: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)
    _sorted_index: np.ndarray = field(
        default_factory=lambda: np.empty(0, dtype=np.int64), repr=False
    )
    _budget_exhausted: bool = field(default=False, repr=False)

    def __post_init__(self) -> None:
        _require(0.0 < self.q < 1.0, f"FDR level q must lie in (0, 1), got {self.q}")

    @property
    def t(self) -> int:
        return len(self.pvals)

    @property
    def selected_set(self) -> frozenset:
        return frozenset(self._selected_set)

    def _advance(self, p_t: float) -> Tuple[int, float, float]:
        t = self.t + 1
        g = gamma_at(self.gamma, t)
        if self.q * g < np.finfo(float).eps and not self._budget_exhausted:
            self._budget_exhausted = True
            log.warning(
                "gamma budget below machine epsilon at t=%s (r=%s, q=%s); selection is effectively frozen",
                t, self.gamma.r, self.q,
            )
        self.pvals.append(p_t)
        self.gammas.append(g)
        return t, g, _budget_ratio(p_t, self.q, g)

    def _mark(self, indices: Sequence[int]) -> Tuple[int, ...]:
        fresh = tuple(sorted(set(indices) - self._selected_set))
        self.selected.extend(fresh)
        self._selected_set.update(fresh)
        return fresh


def online_bh_step(state: OnlineSelectionState, p_t: float) -> List[int]:
    """Feed one p-value; returns the indices selected at this step."""
    p_t = _check_p(p_t)
    t, _, ratio = state._advance(p_t)

    pos = int(np.searchsorted(state._sorted_ratios, ratio, side="right"))
    state._sorted_ratios = np.insert(state._sorted_ratios, pos, ratio)
    state._sorted_index = np.insert(state._sorted_index, pos, t)

    old_k = state.k_star
    new_k = old_k
    if t > old_k:
        window = state._sorted_ratios[old_k:t]
        ks = np.arange(old_k + 1, t + 1, dtype=float)
        hits = np.nonzero(window <= ks)[0]
        if hits.size:
            new_k = old_k + int(hits[-1]) + 1
    state.k_star = new_k

    candidates: List[int] = []
    if new_k > old_k:
        lo = int(np.searchsorted(state._sorted_ratios, float(old_k), side="right"))
        hi = int(np.searchsorted(state._sorted_ratios, float(new_k), side="right"))
        candidates.extend(int(j) for j in state._sorted_index[lo:hi])
    # ratios in (old_k, new_k] already include t when it lands there
    if ratio <= old_k:
        candidates.append(t)
    return list(state._mark(candidates))


def ob_step(state: OnlineSelectionState, p_t: float) -> List[int]:
    """Online Bonferroni: select t iff p_t <= q * gamma_t. k_star is unused."""
    p_t = _check_p(p_t)
    t, _, ratio = state._advance(p_t)
    return list(state._mark([t] if ratio <= 1.0 else []))


def recompute_online_bh(
    pvals: Sequence[float], q: float, gammas: Sequence[float]
) -> Tuple[int, Set[int]]:
    """k*_t and R_t recomputed from scratch out of the stored p-values."""
    _require(len(pvals) == len(gammas), "pvals and gammas must have equal length")
    ratios = np.array(
        [_budget_ratio(float(p), q, float(g)) for p, g in zip(pvals, gammas)], dtype=float
    )
    if ratios.size == 0:
        return 0, set()
    ks = np.arange(1, ratios.size + 1)
    counts = np.searchsorted(np.sort(ratios), ks.astype(float), side="right")
    passing = np.nonzero(counts >= ks)[0]
    k_star = int(ks[passing[-1]]) if passing.size else 0
    return k_star, {int(j) + 1 for j in np.nonzero(ratios <= k_star)[0]}


def run_online_bh(
    pvals: Sequence[float], q: float, r: float, trajectory: Optional[SelectionTrajectory] = None
) -> OnlineSelectionState:
    """Replay a whole stream through online_bh_step."""
    state = OnlineSelectionState(q=q, gamma=GammaSequence(r))
    for p in pvals:
        newly = online_bh_step(state, p)
        if trajectory is not None:
            trajectory.append(
                Snapshot(
                    t=state.t,
                    p_t=float(p),
                    gamma_t=state.gammas[-1],
                    k_star=state.k_star,
                    newly_selected=tuple(newly),
                    cum_selected=len(state.selected),
                )
            )
    return state


# ---------------------------------------------------------------------------
# Oracle check: incremental state vs. recomputation at every step
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OracleReport:
    streams: int
    steps: int
    mismatches: Tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.mismatches


def random_pvalue_stream(rng: np.random.Generator, length: int) -> np.ndarray:
    """Uniform nulls mixed with small signal p-values and exact ties."""
    p = rng.uniform(size=length)
    signal = rng.uniform(size=length) < rng.uniform(0.1, 0.6)
    p[signal] = rng.beta(0.2, 8.0, size=int(signal.sum()))
    ties = rng.uniform(size=length) < 0.05
    p[ties] = np.round(p[ties], 2)
    return np.clip(p, 0.0, 1.0)


def oracle_check(streams: int = 1000, max_len: int = 300, seed: int = 0) -> OracleReport:
    _require(streams >= 1 and max_len >= 1, "streams and max_len must be >= 1")
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    mismatches: List[str] = []
    steps = 0
    for s in range(int(streams)):
        length = int(rng.integers(1, int(max_len) + 1))
        q = float(rng.uniform(0.01, 0.5))
        r = float(rng.uniform(0.9, 0.9995))
        state = OnlineSelectionState(q=q, gamma=GammaSequence(r))
        prev: Set[int] = set()
        for p in random_pvalue_stream(rng, length):
            online_bh_step(state, float(p))
            steps += 1
            k_ref, sel_ref = recompute_online_bh(state.pvals, q, state.gammas)
            current = set(state.selected_set)
            if k_ref != state.k_star or sel_ref != current or not prev <= current:
                mismatches.append(
                    f"stream {s} t={state.t}: k*={state.k_star} vs {k_ref}, "
                    f"|R|={len(current)} vs {len(sel_ref)}"
                )
                break
            prev = current
    if mismatches:
        log.error("oracle check found %s mismatching streams", len(mismatches))
    else:
        log.info("oracle check passed: %s streams, %s steps", streams, steps)
    return OracleReport(streams=int(streams), steps=steps, mismatches=tuple(mismatches))
