"""Stateful adversarial query protocols.

The adaptive oracle reveals one affine piece per query and answers with
respect to the pieces revealed so far; locality of the ball smoothing
makes those answers coincide with the completed instance's answers at
the same points, and finalize() re-checks that coincidence as a runtime
assertion instead of trusting it. The randomized oracle fixes a hidden
random basis up front and tracks how strongly each query correlates
with the not-yet-relevant directions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .evaluator import (
    EXACT_AFFINE,
    MCBudget,
    OracleResponse,
    locally_affine_index,
    oracle_answer,
)
from .geometry import random_orthonormal_basis
from .instance import (
    DETERMINISTIC,
    RANDOMIZED,
    HardInstance,
    InstanceParams,
    append_piece,
    validate,
)
from .streams import child_seed, stream

DEFAULT_MC_SAMPLES = 100_000


class OracleExhaustedError(RuntimeError):
    """The query budget T has been spent."""


@dataclass
class QueryRecord:
    """One query/response pair with its per-query flags.

    event_e_margin is max_{j>=i} |a_j . x_i| in randomized mode
    (recorded at query time); in deterministic mode pieces j > i do not
    exist yet, so finalize() fills max_{j>i} |a_j . x_i| as a
    cross-check (zero by construction, up to roundoff).
    """

    index: int
    x: np.ndarray
    response: OracleResponse
    event_e_margin: float | None
    locality_ok: bool


@dataclass
class Transcript:
    mode: str
    params: InstanceParams
    records: list[QueryRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def jsonl_records(self, dump_vectors: bool = False) -> list[dict]:
        rows = []
        for rec in self.records:
            row = {
                "i": rec.index,
                "x_norm": float(np.linalg.norm(rec.x)),
                "value": rec.response.value,
                "grad_norm": float(np.linalg.norm(rec.response.gradient)),
                "regime": rec.response.regime,
                "event_e_margin": rec.event_e_margin,
                "locality_ok": rec.locality_ok,
            }
            if dump_vectors:
                row["x"] = rec.x.tolist()
                row["gradient"] = rec.response.gradient.tolist()
            rows.append(row)
        return rows

    def to_jsonl(self, path, dump_vectors: bool = False) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for row in self.jsonl_records(dump_vectors):
                fh.write(json.dumps(row) + "\n")


@dataclass
class ReplayEntry:
    index: int
    recorded_regime: str
    replay_regime: str
    exact_equal: bool
    reason: str = ""


@dataclass
class ConsistencyReport:
    """Recorded-versus-replayed comparison against the final instance."""

    all_equal: bool
    partial: bool
    entries: list[ReplayEntry]

    @property
    def first_mismatch(self) -> int | None:
        for entry in self.entries:
            if not entry.exact_equal:
                return entry.index
        return None


def _responses_equal(a: OracleResponse, b: OracleResponse) -> str:
    """Empty string if bit-identical, else the first differing field."""
    if a.regime != b.regime:
        return "regime_mismatch"
    if a.affine_index != b.affine_index:
        return "affine_index_changed"
    if a.value != b.value or a.value_stderr != b.value_stderr:
        return "value_mismatch"
    if not np.array_equal(a.gradient, b.gradient):
        return "gradient_mismatch"
    if len(a.higher) != len(b.higher):
        return "higher_mismatch"
    for ha, hb in zip(a.higher, b.higher):
        if ha.order != hb.order or ha.is_zero != hb.is_zero:
            return "higher_mismatch"
        if not ha.is_zero and not np.array_equal(ha.tensor, hb.tensor):
            return "higher_mismatch"
    return ""


def replay_consistency(
    instance: HardInstance,
    transcript: Transcript,
    rescale: float = 1.0,
    mc_samples: int = DEFAULT_MC_SAMPLES,
    seed: int = 0,
    replay_monte_carlo: bool = False,
) -> ConsistencyReport:
    """Replay every recorded query against `instance` and compare.

    Exact-affine pairs must match bit for bit. A recorded Monte-Carlo
    response is re-run (same streams) only when replay_monte_carlo is
    set, which is sound only if `instance` is the instance the record
    was produced from; under the adaptive protocol the partial and
    final instances smooth over different subspace sizes, so MC records
    are flagged instead.
    """
    entries = []
    for rec in transcript.records:
        idx = locally_affine_index(instance, rec.x)
        replay_regime = EXACT_AFFINE if idx is not None else "monte_carlo"
        recorded = rec.response
        if recorded.regime == EXACT_AFFINE and idx is not None:
            replayed = oracle_answer(instance, rec.x).scaled(rescale)
            reason = _responses_equal(recorded, replayed)
        elif recorded.regime != EXACT_AFFINE and replay_monte_carlo:
            budget = MCBudget(mc_samples, child_seed(seed, "mc", rec.index))
            replayed = oracle_answer(instance, rec.x, budget=budget).scaled(rescale)
            reason = _responses_equal(recorded, replayed)
        elif recorded.regime != replay_regime:
            reason = "regime_mismatch"
        else:
            reason = "monte_carlo_regime"
        entries.append(
            ReplayEntry(
                index=rec.index,
                recorded_regime=recorded.regime,
                replay_regime=replay_regime,
                exact_equal=(reason == ""),
                reason=reason,
            )
        )
    partial = len(transcript) < transcript.params.T
    return ConsistencyReport(
        all_equal=all(e.exact_equal for e in entries), partial=partial, entries=entries
    )


class AdaptiveOracle:
    """Deterministic-mode resisting oracle: builds pieces as queries land.

    Each query appends one piece (from the query's perpendicular
    component, or a seeded random perpendicular direction when the query
    is already in the revealed span) and is answered against the current
    partial instance, normalized by norm_denom.

    Parameter validity is the caller's concern (the harness validates);
    deliberately broken schedules, e.g. a smoothing radius violating
    2*k*delta <= gamma/m, still run, and finalize() then exposes where
    locality failed.
    """

    def __init__(
        self,
        params: InstanceParams,
        seed: int = 0,
        mc_samples: int = DEFAULT_MC_SAMPLES,
        rescale: float = 1.0,
    ):
        if params.mode != DETERMINISTIC:
            raise ValueError("AdaptiveOracle requires deterministic-mode params")
        self.params = params
        self.seed = seed
        self.mc_samples = mc_samples
        self.rescale = rescale
        self.transcript = Transcript(DETERMINISTIC, params)
        self._instance = HardInstance.empty(params)

    @property
    def instance(self) -> HardInstance:
        return self._instance

    @property
    def queries_left(self) -> int:
        return self.params.T - len(self.transcript)

    def query(self, x: np.ndarray) -> OracleResponse:
        if self.queries_left <= 0:
            raise OracleExhaustedError(f"query budget T = {self.params.T} exhausted")
        x = np.array(x, dtype=float)
        t = len(self.transcript) + 1
        self._instance = append_piece(self._instance, x, stream(self.seed, "piece", t))
        budget = MCBudget(self.mc_samples, child_seed(self.seed, "mc", t))
        response = oracle_answer(self._instance, x, budget=budget).scaled(self.rescale)
        self.transcript.records.append(
            QueryRecord(
                index=t,
                x=x,
                response=response,
                event_e_margin=None,
                locality_ok=response.regime == EXACT_AFFINE,
            )
        )
        return response

    def finalize(self) -> tuple[HardInstance, ConsistencyReport]:
        """Final instance plus the recorded-vs-replayed comparison.

        Early finalize (fewer than T queries) is permitted; the report
        carries partial=True. Also backfills the deterministic-mode
        event margins max_{j>i} |a_j . x_i|.
        """
        final = self._instance
        matrix = final.piece_matrix
        for rec in self.transcript.records:
            later = matrix[rec.index:]
            rec.event_e_margin = (
                float(np.abs(later @ rec.x).max()) if len(later) else 0.0
            )
        report = replay_consistency(
            final,
            self.transcript,
            rescale=self.rescale,
            mc_samples=self.mc_samples,
            seed=self.seed,
            replay_monte_carlo=False,
        )
        return final, report


class RandomizedOracle:
    """Fixed hidden-basis oracle: all T pieces drawn up front.

    Records, per query i, the correlation margin max_{j>=i} |a_j . x_i|
    that the low-correlation event bounds by 1/(20 T^1.5).
    """

    def __init__(
        self,
        params: InstanceParams,
        seed: int = 0,
        mc_samples: int = DEFAULT_MC_SAMPLES,
        rescale: float = 1.0,
    ):
        if params.mode != RANDOMIZED:
            raise ValueError("RandomizedOracle requires randomized-mode params")
        problems = validate(params)
        if problems:
            raise ValueError("invalid params: " + "; ".join(problems))
        self.params = params
        self.seed = seed
        self.mc_samples = mc_samples
        self.rescale = rescale
        basis = random_orthonormal_basis(params.d, params.T, stream(seed, "basis"))
        self._instance = HardInstance.from_basis(params, basis)
        self.transcript = Transcript(RANDOMIZED, params)

    @property
    def instance(self) -> HardInstance:
        return self._instance

    @property
    def queries_left(self) -> int:
        return self.params.T - len(self.transcript)

    def query(self, x: np.ndarray) -> OracleResponse:
        if self.queries_left <= 0:
            raise OracleExhaustedError(f"query budget T = {self.params.T} exhausted")
        x = np.array(x, dtype=float)
        i = len(self.transcript) + 1
        margin = float(np.abs(self._instance.piece_matrix[i - 1:] @ x).max())
        budget = MCBudget(self.mc_samples, child_seed(self.seed, "mc", i))
        response = oracle_answer(self._instance, x, budget=budget).scaled(self.rescale)
        self.transcript.records.append(
            QueryRecord(
                index=i,
                x=x,
                response=response,
                event_e_margin=margin,
                locality_ok=response.regime == EXACT_AFFINE,
            )
        )
        return response

    def finalize(self) -> tuple[HardInstance, ConsistencyReport]:
        """The (fixed) instance plus a full replay, Monte-Carlo included.

        The instance never changes here, so replays rerun the exact same
        streams and must match bit for bit in both regimes.
        """
        report = replay_consistency(
            self._instance,
            self.transcript,
            rescale=self.rescale,
            mc_samples=self.mc_samples,
            seed=self.seed,
            replay_monte_carlo=True,
        )
        return self._instance, report


def randomized_new(params: InstanceParams, seed: int, **kwargs) -> RandomizedOracle:
    """Fresh randomized oracle (basis drawn from the seed's stream)."""
    return RandomizedOracle(params, seed=seed, **kwargs)


@dataclass(frozen=True)
class EventECheck:
    held: bool
    first_violation: int | None
    threshold: float
    max_margin: float


def event_e_check(transcript: Transcript, params: InstanceParams) -> EventECheck:
    """Did every recorded margin stay at or below 1/(20 T^1.5)?

    The event is non-strict (margins exactly at the threshold count as
    held). Only meaningful for randomized-mode transcripts.
    """
    if transcript.mode != RANDOMIZED:
        raise ValueError("event-E check applies to randomized-mode transcripts")
    threshold = 1.0 / (20.0 * params.T**1.5)
    first = None
    max_margin = 0.0
    for rec in transcript.records:
        margin = rec.event_e_margin
        if margin is None:
            raise ValueError(f"record {rec.index} is missing its event margin")
        max_margin = max(max_margin, margin)
        if margin > threshold and first is None:
            first = rec.index
    return EventECheck(
        held=first is None,
        first_violation=first,
        threshold=threshold,
        max_margin=max_margin,
    )
