"""Stage cost pieces: fuel, emissions, switching, and their aggregates.

The per-period running cost Q prices committed units' fuel plus their
emissions at the carbon market price, and adds the DG and DR cost
curves. Switching between commitment vectors is charged in closed form:

    kappa_n(i_prev, i) = c_bank + (c_fix - c_bank + c_shut) * i_prev
                         - (c_fix + c_shut) * i_prev * i

which works out to c_bank for every period a unit sits off (banking,
including the period it restarts) and c_fix + c_shut at shutdown. The
quota rebate sum_n quota_n * price is a horizon-level constant and is
deliberately NOT part of Q; trajectory totals subtract it once.
"""

from __future__ import annotations

import numpy as np

from .scenario import Scenario, ThermalUnitParams, VirtualResourceParams

__all__ = [
    "fuel_cost",
    "emission",
    "resource_cost",
    "running_cost",
    "kappa",
    "switching_cost",
    "startup_cost_reference",
    "quota_rebate",
    "horizon_emission_cost",
]


def fuel_cost(unit: ThermalUnitParams, p: float) -> float:
    """Fuel cost of one unit at output p MW, $/period."""
    return unit.a * p * p + unit.b * p + unit.c


def emission(unit: ThermalUnitParams, p: float) -> float:
    """Carbon emission of one unit at output p MW, ton/period."""
    return unit.alpha * p * p + unit.beta * p + unit.gamma


def resource_cost(vr: VirtualResourceParams, p: float) -> float:
    """DG or DR cost at output p MW, $/period."""
    return vr.a * p * p + vr.b * p + vr.c


def running_cost(s: Scenario, commitment, dispatch) -> float:
    """Per-period dispatch cost Q for commitment I and dispatch P.

    dispatch has length N+2 (thermal..., dg, dr). Outputs of
    uncommitted units do not contribute; the quota rebate is excluded.
    """
    p_e = s.cet.price
    total = 0.0
    for n, u in enumerate(s.units):
        if commitment[n]:
            p = dispatch[n]
            total += fuel_cost(u, p) + p_e * emission(u, p)
    total += resource_cost(s.dg, dispatch[s.n_units])
    total += resource_cost(s.dr, dispatch[s.n_units + 1])
    return total


def kappa(unit: ThermalUnitParams, i_prev: int, i_now: int) -> float:
    """Switching charge for one unit moving from status i_prev to i_now.

    Factored so every corner of the truth table evaluates exactly: the
    expanded polynomial form leaves cancellation residue on stay-on.
    """
    return (
        unit.c_bank * (1 - i_prev)
        + (unit.c_fix + unit.c_shut) * i_prev * (1 - i_now)
    )


def switching_cost(s: Scenario, commit_prev, commit_now) -> float:
    """Total switching charge between consecutive commitment vectors."""
    return sum(
        kappa(u, int(commit_prev[n]), int(commit_now[n]))
        for n, u in enumerate(s.units)
    )


def startup_cost_reference(unit: ThermalUnitParams, tau: int) -> float:
    """Restart cost after tau banked periods: c_bank * tau + c_fix.

    Reference formula for the cycle identity: the kappa charges over a
    complete off cycle of length tau sum to this value plus c_shut.
    """
    return unit.c_bank * tau + unit.c_fix


def quota_rebate(s: Scenario) -> float:
    """Value of the free emission allowances, sum_n quota_n * price ($)."""
    return sum(u.quota for u in s.units) * s.cet.price


def horizon_emission_cost(s: Scenario, per_unit_tons) -> float:
    """Net carbon trading cost over the horizon, given each unit's total
    emitted tons: sum_n (tons_n - quota_n) * price."""
    tons = np.asarray(per_unit_tons, dtype=float)
    if tons.shape != (s.n_units,):
        raise ValueError(f"expected {s.n_units} per-unit totals, got shape {tons.shape}")
    return float(sum((tons[n] - u.quota) * s.cet.price for n, u in enumerate(s.units)))
