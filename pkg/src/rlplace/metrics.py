"""Evaluation metrics and CSV reporting."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
import csv
from dataclasses import dataclass, field
import math
import os
from pathlib import Path
import tempfile
from typing import TYPE_CHECKING

from .domain import ScenarioConfig

if TYPE_CHECKING:
    from .sim import TickRecord

ARMS = (("static", "delay"), ("rl", "delay"), ("static", "su"), ("rl", "su"))
ARM_LABELS = {
    ("static", "delay"): "D-Opt Static",
    ("rl", "delay"): "D-Opt RL-Dynamic",
    ("static", "su"): "SU-Opt Static",
    ("rl", "su"): "SU-Opt RL-Dynamic",
}


class MetricsError(ValueError):
    pass


class Empty(MetricsError):
    pass


class AllZero(MetricsError):
    pass


class EmptyInput(MetricsError):
    pass


class MissingArm(MetricsError):
    pass


def jain_index(values: Sequence[float]) -> float:
    """(sum v)^2 / (n * sum v^2); 1 for perfectly even load, 1/n when one element carries it all."""
    vals = [float(v) for v in values]
    if not vals:
        raise Empty("jain index of an empty sequence")
    if any(v < 0 for v in vals):
        raise MetricsError("jain index needs non-negative values")
    top = max(vals)
    if top == 0:
        raise AllZero("jain index is undefined when every value is zero")
    # the index is scale-free; normalizing keeps tiny values from underflowing when squared
    vals = [v / top for v in vals]
    return math.fsum(vals) ** 2 / (len(vals) * math.fsum(v * v for v in vals))


@dataclass(frozen=True)
class TrialSummary:
    policy: str
    objective: str
    trial: int | str
    per_service_mean_delay: tuple[float | None, ...]
    per_edge_mean_utilization: tuple[float, ...]
    jain_index: float
    mean_utilization_pct: float
    violation_ticks: int
    reopt_count: int
    per_service_violation_ticks: tuple[int, ...] = ()
    ticks: int = 0
    resolve_failures: int = 0


def summarize(
    ticks: Sequence[TickRecord],
    config: ScenarioConfig,
    policy: str = "",
    objective: str = "",
    trial: int | str = 0,
) -> TrialSummary:
    if not ticks:
        raise EmptyInput("no ticks to summarize")
    n_s, n_e = config.n_services, config.n_edges
    delay_sum = [0.0] * n_s
    delay_n = [0] * n_s
    util_sum = [0.0] * n_e
    mean_util = 0.0
    per_service_viol = [0] * n_s
    violation_ticks = reopts = failures = 0
    for rec in ticks:
        breached = False
        for s, st in enumerate(rec.per_service):
            if st.avg_delay is not None:
                delay_sum[s] += st.avg_delay
                delay_n[s] += 1
            if st.violated:
                per_service_viol[s] += 1
                breached = True
        violation_ticks += breached
        reopts += rec.reoptimized
        failures += rec.resolve_failed
        hosting = []
        for i, et in enumerate(rec.per_edge):
            util_sum[i] += et.utilization
            if et.service is not None:
                hosting.append(et.utilization)
        mean_util += sum(hosting) / len(hosting) if hosting else 0.0
    n = len(ticks)
    per_edge = tuple(u / n for u in util_sum)
    return TrialSummary(
        policy=policy,
        objective=objective,
        trial=trial,
        per_service_mean_delay=tuple(d / k if k else None for d, k in zip(delay_sum, delay_n)),
        per_edge_mean_utilization=per_edge,
        jain_index=jain_index(per_edge) if any(per_edge) else math.nan,
        mean_utilization_pct=100.0 * mean_util / n,
        violation_ticks=violation_ticks,
        reopt_count=reopts,
        per_service_violation_ticks=tuple(per_service_viol),
        ticks=n,
        resolve_failures=failures,
    )


def average_summaries(summaries: Sequence[TrialSummary]) -> TrialSummary:
    """Across-trial mean of every numeric field (delay means skip trials without demand)."""
    if not summaries:
        raise EmptyInput("no summaries to average")
    first = summaries[0]

    def mean(xs):
        xs = [x for x in xs if x is not None]
        return sum(xs) / len(xs) if xs else None

    n_s = len(first.per_service_mean_delay)
    n_e = len(first.per_edge_mean_utilization)
    return TrialSummary(
        policy=first.policy,
        objective=first.objective,
        trial="mean",
        per_service_mean_delay=tuple(mean([x.per_service_mean_delay[s] for x in summaries]) for s in range(n_s)),
        per_edge_mean_utilization=tuple(mean([x.per_edge_mean_utilization[i] for x in summaries]) for i in range(n_e)),
        jain_index=mean([x.jain_index for x in summaries]),
        mean_utilization_pct=mean([x.mean_utilization_pct for x in summaries]),
        violation_ticks=mean([x.violation_ticks for x in summaries]),
        reopt_count=mean([x.reopt_count for x in summaries]),
        per_service_violation_ticks=tuple(
            mean([x.per_service_violation_ticks[s] for x in summaries]) for s in range(n_s)
        ),
        ticks=mean([x.ticks for x in summaries]),
        resolve_failures=mean([x.resolve_failures for x in summaries]),
    )


# --- CSV ------------------------------------------------------------------

TICK_COLUMNS = (
    "time", "service_id", "host", "requesters", "avg_delay_ms", "threshold_ms",
    "reward", "q_value", "utilization", "reoptimized", "resolve_failed",
)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, float):
        return repr(x)
    return str(x)


def atomic_write(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _csv_text(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def ticks_csv(ticks: Sequence[TickRecord]) -> str:
    rows = []
    for rec in ticks:
        for s, st in enumerate(rec.per_service):
            rows.append((
                rec.time, s, st.host, st.requesters, st.avg_delay, st.threshold,
                st.reward, st.q_value, rec.per_edge[st.host].utilization, rec.reoptimized, rec.resolve_failed,
            ))
    return _csv_text(TICK_COLUMNS, rows)


def read_ticks_csv(path: str | Path, config: ScenarioConfig) -> list[TickRecord]:
    """Rebuild tick records from a file written by ``ticks_csv``."""
    from .sim import EdgeTick, ServiceTick, TickRecord

    by_time: dict[float, list[dict]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            by_time.setdefault(float(row["time"]), []).append(row)
    out = []
    for t in sorted(by_time):
        rows = sorted(by_time[t], key=lambda r: int(r["service_id"]))
        per_service = tuple(
            ServiceTick(
                int(r["host"]), int(r["requesters"]),
                float(r["avg_delay_ms"]) if r["avg_delay_ms"] else None,
                float(r["threshold_ms"]), float(r["reward"]), float(r["q_value"]),
            )
            for r in rows
        )
        hosts = {st.host: s for s, st in enumerate(per_service)}
        per_edge = tuple(
            EdgeTick(hosts.get(e.id), 0.0 if e.id not in hosts else config.services[hosts[e.id]].resource_demand / e.capacity)
            for e in config.edges
        )
        out.append(TickRecord(t, per_service, per_edge, rows[0]["reoptimized"] == "1", rows[0]["resolve_failed"] == "1"))
    return out


def summary_header(n_services: int) -> list[str]:
    return (["trial", "policy", "objective", "jain", "mean_util_pct"]
            + [f"mean_delay_s{s}" for s in range(n_services)]
            + ["violations", "reopts"])


def summary_rows(summaries: Sequence[TrialSummary]) -> list[list]:
    return [
        [x.trial, x.policy, x.objective, x.jain_index, x.mean_utilization_pct,
         *x.per_service_mean_delay, x.violation_ticks, x.reopt_count]
        for x in summaries
    ]


def summary_csv(summaries: Sequence[TrialSummary]) -> str:
    n_s = len(summaries[0].per_service_mean_delay) if summaries else 0
    return _csv_text(summary_header(n_s), summary_rows(summaries))


def delay_series_csv(ticks: Sequence[TickRecord]) -> str:
    rows = [
        (rec.time, s, st.avg_delay, st.threshold)
        for rec in ticks
        for s, st in enumerate(rec.per_service)
    ]
    return _csv_text(("time", "service_id", "avg_delay_ms", "threshold_ms"), rows)


@dataclass
class Comparison:
    fairness: list[list] = field(default_factory=list)
    utilization: list[list] = field(default_factory=list)
    files: list[Path] = field(default_factory=list)


def compare_report(
    summaries: Mapping[tuple[str, str], Sequence[TrialSummary]],
    ticks: Mapping[tuple[str, str], Sequence[Sequence[TickRecord]]] | None = None,
    out_dir: str | Path | None = None,
    require: Sequence[tuple[str, str]] = (),
) -> Comparison:
    """Tabulate Jain's index and mean utilization per trial for each (policy, objective) arm.

    Columns follow ``ARMS``; arms without data are left empty. With ``out_dir``
    the tables go to ``fairness.csv`` / ``utilization.csv`` and each arm's
    per-trial delay series to ``delay_<policy>_<objective>_<trial>.csv``.
    """
    for arm in require:
        if not summaries.get(arm):
            raise MissingArm(f"no results for policy={arm[0]} objective={arm[1]}")
    if not any(summaries.values()):
        raise MissingArm("no arm has any results")
    n_trials = max(len(v) for v in summaries.values())
    header = ["trial"] + [ARM_LABELS[a] for a in ARMS]
    result = Comparison()
    for k in range(n_trials):
        frow, urow = [k + 1], [k + 1]
        for arm in ARMS:
            runs = summaries.get(arm, ())
            frow.append(runs[k].jain_index if k < len(runs) else None)
            urow.append(runs[k].mean_utilization_pct if k < len(runs) else None)
        result.fairness.append(frow)
        result.utilization.append(urow)
    frow, urow = ["mean"], ["mean"]
    for arm in ARMS:
        runs = summaries.get(arm, ())
        avg = average_summaries(runs) if runs else None
        frow.append(avg.jain_index if avg else None)
        urow.append(avg.mean_utilization_pct if avg else None)
    result.fairness.append(frow)
    result.utilization.append(urow)

    if out_dir is not None:
        out = Path(out_dir)
        for name, rows in (("fairness.csv", result.fairness), ("utilization.csv", result.utilization)):
            atomic_write(out / name, _csv_text(header, rows))
            result.files.append(out / name)
        for (policy, objective), trials in (ticks or {}).items():
            for k, tr in enumerate(trials):
                path = out / f"delay_{policy}_{objective}_{k + 1}.csv"
                atomic_write(path, delay_series_csv(tr))
                result.files.append(path)
    return result
