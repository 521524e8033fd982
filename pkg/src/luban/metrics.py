"""Evaluation suite: rating aggregation, winning rates, Elo, Spearman, pass-rate tables."""
from __future__ import annotations

import csv
import itertools
import math
import statistics
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy import stats

from . import errors
from .tasks import HOUSE_TASKS, TASK_IDS

DIMENSIONS = ("AP", "CO", "AE", "FB", "FE")
ELO_SCALE = 1 << 20  # ratings are held as integers in units of 2**-20
EXACT_CUTOFF = 8


@dataclass(frozen=True)
class RatingRecord:
    task: str
    baseline: str
    seed: int
    evaluator: str
    dimension: str
    score: int


@dataclass(frozen=True)
class MatchRecord:
    task: str
    baseline_a: str
    seed_a: int
    baseline_b: str
    seed_b: int
    evaluator: str
    winner: str  # "A" or "B"

    @property
    def winner_name(self) -> str:
        return self.baseline_a if self.winner == "A" else self.baseline_b

    @property
    def loser_name(self) -> str:
        return self.baseline_b if self.winner == "A" else self.baseline_a


def _check_rating(r: RatingRecord) -> None:
    if r.dimension not in DIMENSIONS:
        raise errors.InvalidRecord(f"unknown rating dimension {r.dimension!r}")
    if isinstance(r.score, bool) or not isinstance(r.score, int) or not 1 <= r.score <= 5:
        raise errors.InvalidRecord(f"score must be an integer in 1..5, got {r.score!r}")
    if r.dimension == "FE" and r.task in HOUSE_TASKS:
        raise errors.InvalidRecord(f"task {r.task!r} has no environment-level functional rating")


def _check_match(m: MatchRecord) -> None:
    if m.baseline_a == m.baseline_b:
        raise errors.InvalidRecord(f"match pits {m.baseline_a!r} against itself")
    if m.winner not in ("A", "B"):
        raise errors.InvalidRecord(f"winner must be A or B, got {m.winner!r}")


# --------------------------------------------------------------------------
# ratings and winning rates

@dataclass(frozen=True)
class RatingSummary:
    mean: float
    std: float
    n: int


def aggregate_ratings(records) -> dict[tuple[str, str, str], RatingSummary]:
    """Mean and sample standard deviation per (task, baseline, dimension)."""
    records = list(records)
    if not records:
        raise errors.EmptyGroup("no rating records")
    groups: dict[tuple[str, str, str], list[int]] = defaultdict(list)
    for r in records:
        _check_rating(r)
        groups[(r.task, r.baseline, r.dimension)].append(r.score)
    out = {}
    for key in sorted(groups):
        xs = groups[key]
        std = statistics.stdev(xs) if len(xs) > 1 else 0.0
        out[key] = RatingSummary(statistics.fmean(xs), float(std), len(xs))
    return out


def winning_rates(matches) -> dict[tuple[str, str], float]:
    """Wins over appearances, in percent, per (task, baseline)."""
    wins: dict[tuple[str, str], int] = defaultdict(int)
    seen: dict[tuple[str, str], int] = defaultdict(int)
    for m in matches:
        _check_match(m)
        seen[(m.task, m.baseline_a)] += 1
        seen[(m.task, m.baseline_b)] += 1
        wins[(m.task, m.winner_name)] += 1
    return {k: 100.0 * wins[k] / seen[k] for k in sorted(seen)}


# --------------------------------------------------------------------------
# Elo

@dataclass(frozen=True)
class EloParams:
    init: int = 1500
    k: int = 32
    shuffles: int = 100
    seed: int = 0


@dataclass
class EloResult:
    ratings: dict[str, float]
    # per-player sum over shuffles, in units of 1/ELO_SCALE; exact integers
    totals: dict[str, int]
    shuffles: int


def expected_score(ra: float, rb: float) -> float:
    return 1.0 / (1.0 + 10.0 ** ((rb - ra) / 400.0))


def elo_sequence(matches, order, params: EloParams, players) -> dict[str, int]:
    """One sequential pass in the given order; returns fixed-point ratings.

    The winner's gain is rounded once and the loser gives up exactly that
    amount, so the rating total never drifts.
    """
    r = {p: params.init * ELO_SCALE for p in players}
    for i in order:
        m = matches[i]
        w, l = m.winner_name, m.loser_name
        e = expected_score(r[w] / ELO_SCALE, r[l] / ELO_SCALE)
        delta = round(params.k * (1.0 - e) * ELO_SCALE)
        r[w] += delta
        r[l] -= delta
    return r


def elo(matches, params: EloParams = EloParams(), players=None) -> EloResult:
    """Sequential Elo averaged over ``params.shuffles`` seeded orderings of the matches."""
    matches = list(matches)
    for m in matches:
        _check_match(m)
    names = set(players or ())
    for m in matches:
        names.update((m.baseline_a, m.baseline_b))
    names = sorted(names)
    if params.shuffles < 1:
        raise ValueError("shuffles must be >= 1")
    rng = np.random.default_rng(params.seed)
    totals = {p: 0 for p in names}
    for _ in range(params.shuffles):
        order = rng.permutation(len(matches)).tolist()
        for p, v in elo_sequence(matches, order, params, names).items():
            totals[p] += v
    ratings = {p: float(Fraction(totals[p], ELO_SCALE * params.shuffles)) for p in names}
    return EloResult(ratings, totals, params.shuffles)


# --------------------------------------------------------------------------
# Spearman

@dataclass(frozen=True)
class SpearmanResult:
    rho: float | None  # None when either input is constant
    p: float | None
    n: int
    method: str  # exact | t | n/a

    def format(self) -> tuple[str, str]:
        if self.rho is None:
            return "n/a", "n/a"
        return f"{self.rho:.4f}", f"{self.p:.4g}"


def _ranks2(v) -> np.ndarray:
    """Average ranks, doubled so ties stay integral."""
    return (2 * stats.rankdata(np.asarray(v, dtype=float), method="average")).astype(np.int64)


def spearman(x, y, exact_cutoff: int = EXACT_CUTOFF) -> SpearmanResult:
    """Rank correlation with a two-sided p.

    For n <= ``exact_cutoff`` the p-value is the share of all n! pairings whose
    |rho| reaches the observed |rho|. Permuting one rank vector leaves both
    variances fixed, so that comparison is done on integer covariances.
    """
    x, y = list(x), list(y)
    if len(x) != len(y):
        raise errors.LengthMismatch(f"x has {len(x)} samples, y has {len(y)}")
    n = len(x)
    if n < 3:
        raise errors.TooFewSamples(f"need at least 3 samples, got {n}")
    a, b = _ranks2(x), _ranks2(y)
    sa, sb = int(a.sum()), int(b.sum())
    vx = n * int((a * a).sum()) - sa * sa
    vy = n * int((b * b).sum()) - sb * sb
    if vx == 0 or vy == 0:
        return SpearmanResult(None, None, n, "n/a")
    cov = n * int((a * b).sum()) - sa * sb
    if cov * cov == vx * vy:
        rho = 1.0 if cov > 0 else -1.0
    else:
        rho = cov / math.sqrt(vx * vy)
    if n <= exact_cutoff:
        perms = np.array(list(itertools.permutations(b.tolist())), dtype=np.int64)
        covs = n * (perms @ a) - sa * sb
        p = float(Fraction(int(np.count_nonzero(np.abs(covs) >= abs(cov))), len(perms)))
        return SpearmanResult(rho, p, n, "exact")
    if abs(rho) == 1.0:
        return SpearmanResult(rho, 0.0, n, "t")
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    p = float(2.0 * stats.t.sf(abs(t), n - 2))
    return SpearmanResult(rho, p, n, "t")


# --------------------------------------------------------------------------
# pass rates and protocol

def pass_rate_table(results: dict[tuple[str, str], list[float]]) -> dict[tuple[str, str], float]:
    """Mean per-seed pass rate, as a percentage, per (task, baseline)."""
    out = {}
    for key in sorted(results):
        seeds = list(results[key])
        if not seeds:
            raise errors.EmptyGroup(f"no seeds for {key}")
        for v in seeds:
            if not 0.0 <= v <= 1.0:
                raise errors.InvalidRecord(f"pass rate {v} outside [0, 1]")
        out[key] = 100.0 * math.fsum(seeds) / len(seeds)
    return out


def fmt2(v: float) -> str:
    return f"{v:.2f}"


def expected_matches(n_tasks: int, n_baselines: int, per_pair: int) -> int:
    return n_tasks * math.comb(n_baselines, 2) * per_pair


def validate_protocol(matches, tasks=TASK_IDS, baselines=None, per_pair: int = 3) -> dict[str, int]:
    """Each evaluator must judge every unordered baseline pair of every task
    exactly ``per_pair`` times, each time on a distinct pairing of seeds."""
    matches = list(matches)
    for m in matches:
        _check_match(m)
    if baselines is None:
        baselines = sorted({m.baseline_a for m in matches} | {m.baseline_b for m in matches})
    tasks, baselines = list(tasks), list(baselines)
    want = expected_matches(len(tasks), len(baselines), per_pair)
    by_eval: dict[str, list[MatchRecord]] = defaultdict(list)
    for m in matches:
        by_eval[m.evaluator].append(m)
    if not by_eval:
        raise errors.ProtocolMismatch("no matches")
    counts = {}
    for ev in sorted(by_eval):
        rows = by_eval[ev]
        if len(rows) != want:
            raise errors.ProtocolMismatch(f"evaluator {ev!r} has {len(rows)} comparisons, expected {want}")
        cells: dict[tuple, set] = defaultdict(set)
        for m in rows:
            if m.task not in tasks or m.baseline_a not in baselines or m.baseline_b not in baselines:
                raise errors.ProtocolMismatch(f"evaluator {ev!r}: unexpected row {m}")
            (pa, sa), (pb, sb) = sorted([(m.baseline_a, m.seed_a), (m.baseline_b, m.seed_b)])
            seeds = cells[(m.task, pa, pb)]
            if (sa, sb) in seeds:
                raise errors.ProtocolMismatch(f"evaluator {ev!r}: repeated seeds {sa},{sb} for {pa} vs {pb}")
            seeds.add((sa, sb))
        for t in tasks:
            for pa, pb in itertools.combinations(sorted(baselines), 2):
                got = len(cells.get((t, pa, pb), ()))
                if got != per_pair:
                    raise errors.ProtocolMismatch(
                        f"evaluator {ev!r}: {t} {pa} vs {pb} has {got} comparisons, expected {per_pair}")
        counts[ev] = len(rows)
    return counts


# --------------------------------------------------------------------------
# CSV input

RATING_FIELDS = ("task", "baseline", "seed", "evaluator", "dimension", "score")
MATCH_FIELDS = ("task", "baseline_a", "seed_a", "baseline_b", "seed_b", "evaluator", "winner")
PASS_FIELDS = ("task", "baseline", "seed", "pass_rate")


def _rows(path, fields) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != fields:
            raise errors.InvalidRecord(f"{path}: header must be {','.join(fields)}")
        return list(reader)


def _int(v: str, what: str) -> int:
    try:
        return int(v)
    except ValueError:
        raise errors.InvalidRecord(f"{what} must be an integer, got {v!r}") from None


def read_ratings(path: Path | str) -> list[RatingRecord]:
    return [RatingRecord(r["task"], r["baseline"], _int(r["seed"], "seed"), r["evaluator"], r["dimension"],
                         _int(r["score"], "score")) for r in _rows(path, RATING_FIELDS)]


def read_matches(path: Path | str) -> list[MatchRecord]:
    return [MatchRecord(r["task"], r["baseline_a"], _int(r["seed_a"], "seed_a"), r["baseline_b"],
                        _int(r["seed_b"], "seed_b"), r["evaluator"], r["winner"])
            for r in _rows(path, MATCH_FIELDS)]


def read_pass_rates(path: Path | str) -> dict[tuple[str, str], list[float]]:
    out: dict[tuple[str, str], list[float]] = defaultdict(list)
    for r in _rows(path, PASS_FIELDS):
        try:
            out[(r["task"], r["baseline"])].append(float(r["pass_rate"]))
        except ValueError:
            raise errors.InvalidRecord(f"pass_rate must be a number, got {r['pass_rate']!r}") from None
    return dict(out)


def format_table(header: list[str], rows: list[list[str]]) -> str:
    """Left-aligned columns separated by two spaces."""
    widths = [max(len(str(c)) for c in col) for col in zip(header, *rows)]
    lines = ["  ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip() for r in [header, *rows]]
    return "\n".join(lines) + "\n"
