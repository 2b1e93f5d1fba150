"""Two-stage and voting ensembles.

The two-stage scheme answers from the frequency model when its p(female)
falls outside the defer band; names inside the band (endpoints inclusive)
and names the model has never seen go to the fallback inferrer. The voting
scheme takes three inferrers and keeps the strict majority among their
definite (female/male) votes; ambiguous and unknown votes do not count,
and a tie yields unknown.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .inferrers import Inferrer
from .mle import GenderLabel, MleModel, Prediction, mle_female

DEFAULT_DEFER_BAND = (0.25, 0.75)


class TiePolicy(Enum):
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class TwoStageConfig:
    primary: MleModel
    fallback: Inferrer
    defer_band: tuple[float, float] = DEFAULT_DEFER_BAND

    def __post_init__(self) -> None:
        lo, hi = self.defer_band
        if not 0.0 <= lo < hi <= 1.0:
            raise ValueError(f"bad defer band [{lo}, {hi}]")


@dataclass(frozen=True)
class VotingConfig:
    voters: tuple[Inferrer, Inferrer, Inferrer]
    tie_policy: TiePolicy = TiePolicy.UNKNOWN

    def __post_init__(self) -> None:
        if len(self.voters) != 3:
            raise ValueError("voting requires exactly 3 voters")
        ids = [v.id for v in self.voters]
        if len(set(ids)) != 3:
            raise ValueError(f"voter ids must be distinct: {ids}")


def majority_vote(predictions: Sequence[Prediction], source: str = "vote") -> Prediction:
    """Strict majority over the definite votes of exactly three predictions.

    The winner's p(female) is the mean over the agreeing voters. Ties among
    definite votes, and the all-indefinite case, return unknown.
    """
    if len(predictions) != 3:
        raise ValueError(f"majority_vote takes exactly 3 predictions, got {len(predictions)}")
    female = [p for p in predictions if p.label is GenderLabel.FEMALE]
    male = [p for p in predictions if p.label is GenderLabel.MALE]
    if len(female) > len(male):
        winners, label = female, GenderLabel.FEMALE
    elif len(male) > len(female):
        winners, label = male, GenderLabel.MALE
    else:
        return Prediction(GenderLabel.UNKNOWN, None, source)
    # fsum keeps the mean identical under any ordering of the voters
    p_female = math.fsum(p.p_female for p in winners) / len(winners)  # type: ignore[misc]
    return Prediction(label, p_female, source)


def _is_tie(predictions: Sequence[Prediction]) -> bool:
    female = sum(1 for p in predictions if p.label is GenderLabel.FEMALE)
    male = sum(1 for p in predictions if p.label is GenderLabel.MALE)
    return female == male and (female + male) > 0


class VotingInferrer(Inferrer):
    """Majority vote across exactly three inferrers."""

    kind = "voting"

    def __init__(self, config: VotingConfig, id: str = "vote") -> None:
        super().__init__(id)
        self.config = config
        self.tie_count = 0

    def _infer_chunk(self, names: Sequence[str]) -> list[Prediction]:
        ballots = [voter.infer_batch(names) for voter in self.config.voters]
        out = []
        for votes in zip(*ballots):
            if _is_tie(votes):
                self.tie_count += 1
            out.append(majority_vote(votes, source=self.id))
        return out


class TwoStageInferrer(Inferrer):
    """Frequency model first; deferred and out-of-vocabulary names go to
    the fallback. Sources are prefixed stage1:/stage2: to record which
    stage answered."""

    kind = "two-stage"

    def __init__(self, config: TwoStageConfig, id: str | None = None) -> None:
        if id is None:
            id = f"{config.primary.model_id}+{config.fallback.id}"
        super().__init__(id)
        self.config = config

    def _infer_chunk(self, names: Sequence[str]) -> list[Prediction]:
        model = self.config.primary
        lo, hi = self.config.defer_band
        out: list[Prediction | None] = [None] * len(names)
        deferred: list[tuple[int, str]] = []
        for i, name in enumerate(names):
            counts = model.table.entries.get(name)
            if counts is None or lo <= mle_female(counts) <= hi:
                deferred.append((i, name))
                continue
            pred = model.classify(name)
            out[i] = Prediction(pred.label, pred.p_female, f"stage1:{pred.source}")
        if deferred:
            answers = self.config.fallback.infer_batch([name for _, name in deferred])
            for (i, _), pred in zip(deferred, answers):
                out[i] = Prediction(pred.label, pred.p_female, f"stage2:{pred.source}")
        return out  # type: ignore[return-value]


def two_stage_infer(config: TwoStageConfig, name: str) -> Prediction:
    return TwoStageInferrer(config).infer(name)


def voting_two_stage_infer(
    model: MleModel,
    voting: VotingConfig,
    band: tuple[float, float],
    name: str,
) -> Prediction:
    """Two-stage control flow with a majority vote as the fallback."""
    fallback = VotingInferrer(voting)
    return two_stage_infer(TwoStageConfig(model, fallback, band), name)
