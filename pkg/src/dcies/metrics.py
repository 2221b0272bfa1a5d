"""Scores over importance matrices and loss-capacity curves.

Five numbers summarize how a code ``c`` relates to factors ``z``:

* Disentanglement ``D``: one minus the base-K entropy of each importance
  row, weighted by the row's share of total importance mass.  High when
  each code unit serves a single factor.
* Completeness ``C``: one minus the base-L entropy of each importance
  column.  High when each factor needs a single code unit.
* Informativeness ``I``: one minus the best normalized prediction loss
  over a capacity ladder.
* Explicitness ``E``: one minus the normalized area between the
  loss-capacity curve and its best-achieved-loss line (AULCC).  High when
  low-capacity probes already extract everything.
* Size ``S = K / L``: factor-to-code dimensionality ratio.

D, C and I live in [0, 1]; E lives in [-1, 1] (negative means the loss
fell sub-linearly with capacity); S is a positive ratio.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import ImportanceMatrix, NormalizedRows, row_distributions

AGG_TOL = 1e-9


class UndefinedBase(UserWarning):
    """Entropy base would be 1 (a single factor or single code unit).

    The affected score is reported as 1 by convention, with a flag: a lone
    dimension cannot be mixed with anything.
    """


class DegenerateBaseline(Exception):
    """Explicitness is undefined when the loss floor meets the baseline."""


def entropy(p: np.ndarray, base: int) -> np.ndarray:
    """Shannon entropy with log base ``base`` and the 0 log 0 := 0 rule.

    Accepts a matrix of distributions along ``axis=-1`` and returns one
    value per distribution, each in [0, 1] for ``base`` = alphabet size.
    """
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    return -terms.sum(axis=-1) / np.log(base)


@dataclass(frozen=True)
class DisentanglementResult:
    overall: float
    per_code: np.ndarray
    row_weights: np.ndarray
    dead_codes: tuple[int, ...]
    undefined_base: bool = False


@dataclass(frozen=True)
class CompletenessResult:
    overall: float
    per_factor: np.ndarray
    undefined_base: bool = False


def disentanglement(matrix: ImportanceMatrix) -> DisentanglementResult:
    """D_i = 1 - H_K(row i of the row-normalized matrix); D = sum rho_i D_i.

    Dead code rows carry weight zero, so their (placeholder-uniform) D_i
    never influences the aggregate.  K = 1 yields D = 1 with a flag.
    """
    rows: NormalizedRows = row_distributions(matrix)
    k = matrix.n_factors
    if k == 1:
        warnings.warn("single factor: row entropy base is 1, reporting D = 1", UndefinedBase)
        per_code = np.ones(matrix.n_codes)
        return DisentanglementResult(1.0, per_code, rows.row_weights, rows.dead_rows, True)
    per_code = 1.0 - entropy(rows.values, base=k)
    overall = float(np.dot(rows.row_weights, per_code))
    return DisentanglementResult(overall, per_code, rows.row_weights, rows.dead_rows)


def completeness(matrix: ImportanceMatrix) -> CompletenessResult:
    """C_j = 1 - H_L(column j); columns are already distributions."""
    l = matrix.n_codes
    if l == 1:
        warnings.warn("single code unit: column entropy base is 1, reporting C = 1", UndefinedBase)
        return CompletenessResult(1.0, np.ones(matrix.n_factors), True)
    per_factor = 1.0 - entropy(matrix.values.T, base=l)
    return CompletenessResult(float(per_factor.mean()), per_factor)


@dataclass(frozen=True)
class LossCapacityCurve:
    """Normalized test losses of best-per-capacity probes for one factor.

    ``baseline`` and ``floor`` are in normalized-loss units (the baseline
    predictor maps to 1; the default floor is 0).  ``capacity_scale`` is
    recorded because the explicitness score depends on it.
    """

    factor: int
    capacities: np.ndarray
    losses: np.ndarray
    baseline: float = 1.0
    floor: float = 0.0
    capacity_scale: str = "log"
    best_index: int = field(init=False, default=0)
    best_loss: float = field(init=False, default=0.0)

    def __post_init__(self):
        caps = np.asarray(self.capacities, dtype=float)
        losses = np.asarray(self.losses, dtype=float)
        if caps.ndim != 1 or caps.shape != losses.shape:
            raise ValueError("capacities and losses must be 1-D and aligned")
        if caps.size < 2:
            raise ValueError("a curve needs at least two capacities")
        if np.any(np.diff(caps) <= 0):
            raise ValueError("capacities must be strictly increasing")
        losses = np.clip(losses, self.floor, self.baseline)
        best = int(np.argmin(losses))  # ties resolve to the smallest capacity
        caps.flags.writeable = False
        losses.flags.writeable = False
        object.__setattr__(self, "capacities", caps)
        object.__setattr__(self, "losses", losses)
        object.__setattr__(self, "best_index", best)
        object.__setattr__(self, "best_loss", float(losses[best]))


def aulcc(curve: LossCapacityCurve) -> float:
    """Trapezoidal area between the curve and its best-loss line.

    The sum runs up to the best-loss capacity only; if the best loss is
    already achieved at the lowest capacity the area is zero.
    """
    t_star = curve.best_index
    if t_star == 0:
        return 0.0
    ell = curve.losses
    dk = np.diff(curve.capacities[: t_star + 1])
    mids = 0.5 * (ell[:t_star] + ell[1 : t_star + 1]) - curve.best_loss
    return float(np.dot(mids, dk))


def explicitness(curve: LossCapacityCurve) -> float:
    """E_j = 1 - AULCC / (half the span times the baseline-floor gap).

    1 means no surplus capacity was needed beyond the first rung; 0 means
    the loss fell linearly from baseline to floor; negative means
    sub-linear decrease.
    """
    gap = curve.baseline - curve.floor
    if gap <= 0:
        raise DegenerateBaseline(
            f"factor {curve.factor}: floor {curve.floor} >= baseline {curve.baseline}"
        )
    normalizer = 0.5 * (curve.capacities[-1] - curve.capacities[0]) * gap
    return 1.0 - aulcc(curve) / normalizer


def informativeness(curves: list[LossCapacityCurve]) -> tuple[float, np.ndarray]:
    """I_j = 1 - best normalized loss; I is the plain mean over factors."""
    per_factor = np.asarray([1.0 - c.best_loss for c in curves])
    return float(per_factor.mean()), per_factor


def size_score(n_factors: int, n_codes: int) -> float:
    """S = K / L, the factor-to-code dimensionality ratio."""
    if n_factors < 1 or n_codes < 1:
        raise ValueError("dimensions must be positive")
    return n_factors / n_codes


@dataclass(frozen=True)
class VerdictResult:
    """Identifiability class suggested by the scores (advisory).

    ``recovered_permutation`` maps factor j to the code unit argmax of
    column j whenever K = L and D, C clear the bar.  The caveat: most
    importance measures guarantee "unused implies zero importance" but not
    the converse, so the verdict is a diagnosis, not a proof.
    """

    verdict: str
    recovered_permutation: tuple[int, ...] | None = None
    permutation_within_tol: bool | None = None
    flags: tuple[str, ...] = ()


def _permutation_check(r: np.ndarray, tol: float) -> tuple[tuple[int, ...], bool]:
    argmax = tuple(int(i) for i in r.argmax(axis=0))
    is_bijection = len(set(argmax)) == r.shape[1]
    nearest = np.zeros_like(r)
    nearest[argmax, range(r.shape[1])] = 1.0
    within = is_bijection and bool(np.max(np.abs(r - nearest)) <= tol)
    return argmax, within


def identifiability_verdict(
    d: float,
    c: float,
    i: float,
    e: float,
    matrix: ImportanceMatrix,
    tol: float = 0.05,
    linear_first_capacity: bool = True,
) -> VerdictResult:
    """Map near-one score patterns to identifiability equivalence classes.

    * D, C, I, E all >= 1 - tol with K = L: recovered up to sign and
      permutation.
    * D, C, I >= 1 - tol: recovered up to permutation and element-wise
      reparametrisation.
    * I, E >= 1 - tol: recovered up to an invertible linear map.

    Verdicts that interpret E = 1 as "linear capacity sufficed" are only
    emitted when the ladder's first rung was a linear probe.
    """
    r = matrix.values
    l, k = r.shape
    high = lambda x: x >= 1.0 - tol
    flags: list[str] = []
    if not linear_first_capacity:
        flags.append("first_capacity_not_linear")

    recovered = permutation_ok = None
    if k == l and high(d) and high(c):
        recovered, permutation_ok = _permutation_check(r, tol)

    if high(d) and high(c) and high(i) and high(e) and k == l and linear_first_capacity:
        verdict = "sign_and_permutation"
    elif high(d) and high(c) and high(i):
        verdict = "permutation_and_reparametrisation"
    elif high(i) and high(e) and linear_first_capacity:
        verdict = "linear"
    else:
        verdict = "none"
    return VerdictResult(verdict, recovered, permutation_ok, tuple(flags))


@dataclass(frozen=True)
class ScoreReport:
    """Full score bundle for one (representation, probe class, seed) run."""

    d: float
    c: float
    i: float
    e: float
    s: float
    per_code_d: np.ndarray
    row_weights: np.ndarray
    per_factor_c: np.ndarray
    per_factor_i: np.ndarray
    per_factor_e: np.ndarray
    verdict: VerdictResult
    dead_codes: tuple[int, ...] = ()
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        pairs = (
            (self.d, float(np.dot(self.row_weights, self.per_code_d))),
            (self.c, float(np.mean(self.per_factor_c))),
            (self.i, float(np.mean(self.per_factor_i))),
            (self.e, float(np.mean(self.per_factor_e))),
        )
        for got, expect in pairs:
            if abs(got - expect) > AGG_TOL:
                raise ValueError(f"aggregate {got!r} deviates from its parts {expect!r}")

    def to_json_dict(self) -> dict:
        v = self.verdict
        return {
            "D": self.d,
            "C": self.c,
            "I": self.i,
            "E": self.e,
            "S": self.s,
            "per_code": {
                "D_i": [float(x) for x in self.per_code_d],
                "rho": [float(x) for x in self.row_weights],
                "dead": list(self.dead_codes),
            },
            "per_factor": {
                "C_j": [float(x) for x in self.per_factor_c],
                "I_j": [float(x) for x in self.per_factor_i],
                "E_j": [float(x) for x in self.per_factor_e],
            },
            "verdict": {
                "class": v.verdict,
                "recovered_permutation": list(v.recovered_permutation) if v.recovered_permutation else None,
                "permutation_within_tol": v.permutation_within_tol,
                "flags": list(v.flags),
            },
            "provenance": self.provenance,
        }


def score_report(
    matrix: ImportanceMatrix,
    curves: list[LossCapacityCurve],
    verdict_tol: float = 0.05,
    linear_first_capacity: bool = True,
    provenance: dict | None = None,
) -> ScoreReport:
    """Assemble D, C, I, E, S and the verdict from their ingredients."""
    dis = disentanglement(matrix)
    com = completeness(matrix)
    i_overall, i_per = informativeness(curves)
    e_per = np.asarray([explicitness(c) for c in curves])
    e_overall = float(e_per.mean())
    s = size_score(matrix.n_factors, matrix.n_codes)
    verdict = identifiability_verdict(
        dis.overall, com.overall, i_overall, e_overall, matrix,
        tol=verdict_tol, linear_first_capacity=linear_first_capacity,
    )
    return ScoreReport(
        d=dis.overall, c=com.overall, i=i_overall, e=e_overall, s=s,
        per_code_d=dis.per_code, row_weights=dis.row_weights,
        per_factor_c=com.per_factor, per_factor_i=i_per, per_factor_e=e_per,
        verdict=verdict, dead_codes=dis.dead_codes,
        provenance=provenance or {},
    )
