"""Closed-loop rollout of a trained scheduler, with optional disturbances.

A disturbance script overrides the realized dispatch after the decision at
selected periods; the next decision then starts from the overridden state,
which is the point of training state-dependent tail values: recovery needs
no retraining. Each override can be scored against an exact tail
enumeration from the disturbed state.
"""

from __future__ import annotations

import io
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .clho import ValueModel, schedule_step
from .costs import emission, quota_rebate, running_cost, switching_cost
from .errors import BudgetExceededError, ModelMismatchError, UcdError
from .hybrid import Schedule, schedule_text
from .oracle import DEFAULT_BUDGET, enumerate_schedule_costs, enumerate_tail
from .scenario import Scenario, scenario_fingerprint

__all__ = [
    "DisturbanceScript",
    "RunReport",
    "ComparisonReport",
    "simulate",
    "compare_with_oracle",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DisturbanceScript:
    """Sorted (period, forced dispatch) overrides, periods 1-indexed."""

    overrides: tuple = ()

    def __post_init__(self):
        seen = -1
        norm = []
        for t, values in self.overrides:
            t = int(t)
            if t <= seen:
                raise UcdError("disturbance periods must be strictly increasing")
            seen = t
            vec = tuple(float(v) for v in values)
            if any(not np.isfinite(v) or v < 0.0 for v in vec):
                raise UcdError(f"disturbance at t={t}: values must be finite and >= 0")
            norm.append((t, vec))
        object.__setattr__(self, "overrides", tuple(norm))

    @classmethod
    def parse(cls, specs) -> "DisturbanceScript":
        """Each spec reads "t=2:200,150"; values in dispatch order."""
        overrides = []
        for spec in specs:
            head, sep, tail = spec.partition(":")
            if not sep or not head.strip().startswith("t="):
                raise UcdError(f"bad disturbance {spec!r}; expected t=K:v1,v2,...")
            try:
                t = int(head.strip()[2:])
                values = tuple(float(v) for v in tail.split(","))
            except ValueError as exc:
                raise UcdError(f"bad disturbance {spec!r}: {exc}") from exc
            overrides.append((t, values))
        overrides.sort(key=lambda o: o[0])
        return cls(overrides=tuple(overrides))

    def lookup(self, t: int):
        for tt, values in self.overrides:
            if tt == t:
                return values
        return None


def _pad_override(values, n_units: int):
    if len(values) == n_units + 2:
        return np.asarray(values, dtype=float)
    if len(values) == n_units:
        return np.concatenate([np.asarray(values, dtype=float), [0.0, 0.0]])
    raise UcdError(
        f"disturbance vector has {len(values)} entries; expected "
        f"{n_units} (thermal) or {n_units + 2} (full dispatch)"
    )


@dataclass
class RunReport:
    """Everything a closed-loop run produced, row per period."""

    scenario_name: str
    fingerprint: str
    rows: list = field(default_factory=list)
    running_total: float = 0.0
    switching_total: float = 0.0
    quota_rebate: float = 0.0
    total_cost: float = 0.0
    emission_tons_total: float = 0.0
    oracle_comparison: list = field(default_factory=list)

    @property
    def schedule(self) -> Schedule:
        return Schedule(modes=tuple(tuple(r["mode"]) for r in self.rows))

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario_name,
            "fingerprint": self.fingerprint,
            "schedule": schedule_text(self.schedule),
            "rows": [
                {
                    "t": r["t"],
                    "mode": "".join(str(b) for b in r["mode"]),
                    "planned": list(r["planned"]),
                    "realized": list(r["realized"]),
                    "running": r["running"],
                    "switching": r["switching"],
                    "emissions_ton": r["emissions_ton"],
                    "diverged": r["diverged"],
                }
                for r in self.rows
            ],
            "running_total": self.running_total,
            "switching_total": self.switching_total,
            "quota_rebate": self.quota_rebate,
            "total_cost": self.total_cost,
            "emission_tons_total": self.emission_tons_total,
            "oracle_comparison": self.oracle_comparison,
        }

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")


def simulate(s: Scenario, model: ValueModel, script: DisturbanceScript | None = None,
             oracle_budget: int = 200_000) -> RunReport:
    """Roll the trained scheduler forward from the scenario's initial state.

    Rows mark diverged=True exactly at scripted periods. For every override
    before the final period the realized tail is compared against an exact
    enumeration from the disturbed state (skipped with a warning if the
    enumeration budget runs out).
    """
    if scenario_fingerprint(s) != model.fingerprint:
        raise ModelMismatchError(
            "model fingerprint does not match the scenario; retrain or pass "
            "a matching model"
        )
    script = script or DisturbanceScript()
    for t, _ in script.overrides:
        if not 1 <= t <= s.horizon:
            raise UcdError(f"disturbance period t={t} outside 1..{s.horizon}")

    report = RunReport(scenario_name=s.name, fingerprint=model.fingerprint)
    i_prev = s.initial_commitment
    p_prev = np.asarray(s.initial_dispatch, dtype=float)
    for t in range(1, s.horizon + 1):
        mode, planned = schedule_step(model, s, t, i_prev, p_prev)
        forced = script.lookup(t)
        realized = _pad_override(forced, s.n_units) if forced is not None else planned
        run = running_cost(s, mode, realized)
        sw = switching_cost(s, i_prev, mode)
        tons = sum(emission(u, realized[n]) for n, u in enumerate(s.units) if mode[n])
        report.rows.append({
            "t": t, "mode": tuple(mode), "planned": np.asarray(planned, dtype=float),
            "realized": np.asarray(realized, dtype=float), "running": float(run),
            "switching": float(sw), "emissions_ton": float(tons),
            "diverged": forced is not None,
        })
        report.running_total += float(run)
        report.switching_total += float(sw)
        report.emission_tons_total += float(tons)
        i_prev = mode
        p_prev = np.asarray(realized, dtype=float)

    report.quota_rebate = quota_rebate(s)
    report.total_cost = report.running_total + report.switching_total - report.quota_rebate

    for t, _ in script.overrides:
        if t >= s.horizon:
            continue
        row = report.rows[t - 1]
        realized_tail = sum(r["running"] + r["switching"] for r in report.rows[t:])
        try:
            exact_cost, _ = enumerate_tail(s, t + 1, row["mode"], row["realized"],
                                           budget=oracle_budget)
        except BudgetExceededError:
            log.warning("oracle tail from t=%d skipped: enumeration budget "
                        "%d exhausted", t + 1, oracle_budget)
            report.oracle_comparison.append({
                "after_t": t, "realized_tail": float(realized_tail),
                "oracle_tail": None, "gap": None,
            })
            continue
        report.oracle_comparison.append({
            "after_t": t,
            "realized_tail": float(realized_tail),
            "oracle_tail": float(exact_cost),
            "gap": float(realized_tail - exact_cost),
        })
    return report


@dataclass
class ComparisonReport:
    """Per-schedule exact costs next to the closed-loop pick."""

    scenario_name: str
    rows: list                 # dicts: schedule, total_cost, is_argmin, is_clho
    clho_schedule: str
    clho_cost: float
    oracle_schedule: str | None
    oracle_cost: float | None
    matches: bool | None

    def csv(self) -> str:
        buf = io.StringIO()
        buf.write("schedule,total_cost,is_argmin,is_clho\n")
        for r in self.rows:
            buf.write(f"{r['schedule']},{float(r['total_cost'])!r},"
                      f"{int(r['is_argmin'])},{int(r['is_clho'])}\n")
        return buf.getvalue()


def compare_with_oracle(s: Scenario, model: ValueModel,
                        budget: int = DEFAULT_BUDGET) -> ComparisonReport:
    """Exhaustive schedule table with the closed-loop choice marked.

    Falls back to reporting only the closed-loop result when full
    enumeration exceeds the budget.
    """
    report = simulate(s, model)
    clho_text = schedule_text(report.schedule)
    clho_cost = report.total_cost
    try:
        table = enumerate_schedule_costs(s, budget=budget)
    except BudgetExceededError:
        log.warning("full enumeration exceeded budget %d; reporting the "
                    "closed-loop schedule only", budget)
        return ComparisonReport(
            scenario_name=s.name,
            rows=[{"schedule": clho_text, "total_cost": clho_cost,
                   "is_argmin": False, "is_clho": True}],
            clho_schedule=clho_text, clho_cost=clho_cost,
            oracle_schedule=None, oracle_cost=None, matches=None,
        )
    best_cost = min(c for _, c in table)
    tol = 1e-9 * max(1.0, abs(best_cost))
    best_text = next(txt for txt, c in table if c <= best_cost + tol)
    rows = [
        {"schedule": txt, "total_cost": cost,
         "is_argmin": cost <= best_cost + tol, "is_clho": txt == clho_text}
        for txt, cost in table
    ]
    return ComparisonReport(
        scenario_name=s.name, rows=rows, clho_schedule=clho_text,
        clho_cost=clho_cost, oracle_schedule=best_text, oracle_cost=best_cost,
        matches=(clho_text == best_text),
    )
