"""Post-session preference surveys: one-proportion z-tests with Bonferroni
control and Bonferroni-adjusted Wald confidence intervals.

Normal CDF/quantile come from the standard library (``math.erfc`` and
``statistics.NormalDist``, which implements the AS241 rational
approximation), both good to near machine precision; the test suite pins
them against a 50-digit oracle.
"""

from __future__ import annotations

import csv
import math
import statistics
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

QUESTION_IDS = tuple(f"q{i}" for i in range(1, 8))
ANSWER_VALUES = ("csi", "chat")
CSV_HEADER = ["respondent", *QUESTION_IDS]

_NORMAL = statistics.NormalDist()


def normal_cdf(z: float) -> float:
    # erfc form avoids cancellation in the far tails
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def normal_quantile(q: float) -> float:
    if not 0.0 < q < 1.0:
        raise ValueError(f"quantile argument must be in (0, 1), got {q}")
    return _NORMAL.inv_cdf(q)


class SurveyError(ValueError):
    pass


@dataclass(frozen=True)
class SurveyResponse:
    """One respondent's seven binary answers; partial responses are invalid."""

    respondent_id: str
    answers: dict[str, str]

    def __post_init__(self) -> None:
        if set(self.answers) != set(QUESTION_IDS):
            missing = sorted(set(QUESTION_IDS) - set(self.answers))
            extra = sorted(set(self.answers) - set(QUESTION_IDS))
            raise SurveyError(
                f"response {self.respondent_id!r} must answer exactly q1..q7"
                + (f"; missing {missing}" if missing else "")
                + (f"; unexpected {extra}" if extra else "")
            )
        for qid in QUESTION_IDS:
            if self.answers[qid] not in ANSWER_VALUES:
                raise SurveyError(
                    f"response {self.respondent_id!r} {qid}: expected one of "
                    f"{ANSWER_VALUES}, got {self.answers[qid]!r}"
                )


@dataclass(frozen=True)
class QuestionResult:
    question_id: str
    n: int
    csi_count: int
    proportion: float
    z: float
    p_value: float
    ci_low: float
    ci_high: float
    significant: bool


def bonferroni_alpha(family_alpha: float, m: int) -> float:
    """Per-test significance level controlling the family-wise rate."""
    if m < 1:
        raise ValueError(f"number of tests must be >= 1, got {m}")
    if not 0.0 < family_alpha < 1.0:
        raise ValueError(f"family_alpha must be in (0, 1), got {family_alpha}")
    return family_alpha / m


def proportion_z_test(
    successes: float, n: int, p0: float, *, one_sided: bool = False
) -> tuple[float, float]:
    """z statistic and p-value of a one-proportion z-test.

    Two-sided by default: p = 2 * (1 - Phi(|z|)). The one-sided variant
    tests the greater-than direction.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0.0 < p0 < 1.0:
        raise ValueError(f"p0 must be in (0, 1), got {p0}")
    if not 0 <= successes <= n:
        raise ValueError(f"successes must be in [0, n], got {successes}")
    phat = successes / n
    z = (phat - p0) / math.sqrt(p0 * (1.0 - p0) / n)
    if one_sided:
        p = normal_cdf(-z)
    else:
        p = math.erfc(abs(z) / math.sqrt(2.0))  # == 2 * (1 - Phi(|z|))
    return z, min(p, 1.0)


def bonferroni_ci(
    successes: float, n: int, family_alpha: float, m: int
) -> tuple[float, float]:
    """Bonferroni-adjusted Wald interval, clamped to [0, 1].

    phat +/- z* sqrt(phat (1 - phat) / n) with z* = Phi^-1(1 - alpha/(2m)).
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    alpha = bonferroni_alpha(family_alpha, m)
    zstar = normal_quantile(1.0 - alpha / 2.0)
    phat = successes / n
    half = zstar * math.sqrt(phat * (1.0 - phat) / n)
    return max(0.0, phat - half), min(1.0, phat + half)


def analyze_surveys(
    responses: Sequence[SurveyResponse],
    *,
    family_alpha: float = 0.01,
    m: int = 7,
    p0: float = 0.5,
    one_sided: bool = False,
) -> list[QuestionResult]:
    """Per-question z-test and adjusted interval over complete responses."""
    if not responses:
        raise SurveyError("need at least one survey response")
    seen = set()
    for r in responses:
        if r.respondent_id in seen:
            raise SurveyError(f"duplicate respondent {r.respondent_id!r}")
        seen.add(r.respondent_id)
    alpha = bonferroni_alpha(family_alpha, m)
    results = []
    for qid in QUESTION_IDS:
        answers = [r.answers[qid] for r in responses]
        n = len(answers)
        csi_count = sum(1 for a in answers if a == "csi")
        z, p = proportion_z_test(csi_count, n, p0, one_sided=one_sided)
        ci_low, ci_high = bonferroni_ci(csi_count, n, family_alpha, m)
        results.append(
            QuestionResult(
                question_id=qid,
                n=n,
                csi_count=csi_count,
                proportion=csi_count / n,
                z=z,
                p_value=p,
                ci_low=ci_low,
                ci_high=ci_high,
                significant=p < alpha,
            )
        )
    return results


def read_survey_csv(fp: IO[str]) -> list[SurveyResponse]:
    """Comma-separated responses: header respondent,q1,...,q7; cells csi|chat."""
    reader = csv.DictReader(fp)
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != CSV_HEADER:
        raise SurveyError(
            f"survey file header must be {','.join(CSV_HEADER)}, got "
            f"{reader.fieldnames}"
        )
    responses = []
    for row in reader:
        answers = {qid: (row[qid] or "").strip() for qid in QUESTION_IDS}
        responses.append(SurveyResponse(row["respondent"].strip(), answers))
    return responses


def write_survey_csv(responses: Iterable[SurveyResponse], fp: IO[str]) -> None:
    writer = csv.writer(fp)
    writer.writerow(CSV_HEADER)
    for r in responses:
        writer.writerow([r.respondent_id, *(r.answers[q] for q in QUESTION_IDS)])


def results_table(results: Sequence[QuestionResult], family_alpha: float = 0.01) -> str:
    """Plain-text segmented summary: proportions, intervals, significance."""
    m = len(results)
    alpha = bonferroni_alpha(family_alpha, m) if m else family_alpha
    width = 40
    lines = [
        f"{'question':<9} {'n':>4} {'csi':>4} {'prop':>6} {'z':>7} "
        f"{'p-value':>10} {'ci':>16}  sig  share (| marks 50%)",
    ]
    for r in results:
        bar_len = int(round(r.proportion * width))
        bar = "#" * bar_len + "." * (width - bar_len)
        bar = bar[: width // 2] + "|" + bar[width // 2 :]
        lines.append(
            f"{r.question_id:<9} {r.n:>4} {r.csi_count:>4} {r.proportion:>6.3f} "
            f"{r.z:>7.3f} {r.p_value:>10.3e} "
            f"[{r.ci_low:>6.3f},{r.ci_high:>6.3f}]  {'yes' if r.significant else ' no'}  {bar}"
        )
    lines.append(
        f"significance: two-sided p < {alpha:.6f} "
        f"(family alpha {family_alpha} over {m} questions)"
    )
    return "\n".join(lines) + "\n"


def results_to_dict(results: Sequence[QuestionResult]) -> list[dict]:
    return [
        {
            "question_id": r.question_id,
            "n": r.n,
            "csi_count": r.csi_count,
            "proportion": r.proportion,
            "z": r.z,
            "p_value": r.p_value,
            "ci_low": r.ci_low,
            "ci_high": r.ci_high,
            "significant": r.significant,
        }
        for r in results
    ]
