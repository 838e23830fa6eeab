"""Dispatch QP: assembly, solutions, certificates, backend equivalence."""

import numpy as np
import pytest

from ucdkit import (
    InfeasibleModeError,
    assemble,
    feasible_modes,
    kkt_residual,
    mode_dynamics,
    solve,
)
from ucdkit import KKT_TOL, FEAS_TOL
from ucdkit.qp import PIVOT_TOL
from ucdkit import _kernels


def test_interior_split_at_700(e1c1):
    sol = solve(assemble(e1c1, 4, (1, 1)))
    assert sol.status == "optimal"
    # equal marginal cost split: 2*a1*p1 + b1 = 2*a2*p2 + b2, p1 + p2 = 700
    assert sol.dispatch[0] == pytest.approx(500.8928571428571, abs=1e-6)
    assert sol.dispatch[1] == pytest.approx(199.1071428571429, abs=1e-6)
    assert sol.kkt <= KKT_TOL


def test_single_unit_carries_demand(e1c1):
    sol = solve(assemble(e1c1, 1, (0, 1)))
    assert sol.dispatch[1] == pytest.approx(200.0)
    assert sol.dispatch[0] == 0.0  # eliminated, not merely near zero


def test_capacity_clamp_active(e1c1):
    sol = solve(assemble(e1c1, 2, (1, 1)))  # demand 350, p2 pinned at p_min
    assert sol.dispatch[1] == pytest.approx(100.0)
    assert sol.dispatch[0] == pytest.approx(250.0)
    assert "cap_lo[1]" in sol.active_set


def test_infeasible_mode_certificate(e1c1):
    sol = solve(assemble(e1c1, 4, (0, 1)))  # 700 MW > unit 2 alone
    assert sol.status == "infeasible"
    assert sol.certificate["row"] == "cap_hi[1]"
    assert sol.certificate["violation"] == pytest.approx(300.0, abs=1e-6)


def test_all_off_infeasible_under_load(e1c1):
    sol = solve(assemble(e1c1, 1, (0, 0)))
    assert sol.status == "infeasible"


def test_mode_dynamics_raises_on_infeasible(e1c1):
    with pytest.raises(InfeasibleModeError, match="t=4"):
        mode_dynamics(e1c1, 4, (0, 1))


def test_feasible_mode_sets(e1c1):
    as_text = lambda ms: {"".join(map(str, m)) for m in ms}
    assert as_text(feasible_modes(e1c1, 1)) == {"01", "10"}   # 200 MW
    assert as_text(feasible_modes(e1c1, 2)) == {"01", "10", "11"}  # 350 MW
    assert as_text(feasible_modes(e1c1, 4)) == {"11"}         # 700 MW


def test_uncommitted_coordinates_do_not_leak(e2c1):
    sol = solve(assemble(e2c1, 3, (1, 1, 0, 0, 0)))
    assert sol.status == "optimal"
    assert sol.dispatch[2] == 0.0
    assert sol.dispatch[3] == 0.0
    assert sol.dispatch[4] == 0.0


def test_balance_holds_with_resources(e2c1):
    sol = solve(assemble(e2c1, 12, (1, 1, 1, 1, 1)))
    assert sol.status == "optimal"
    assert float(np.sum(sol.dispatch)) == pytest.approx(1500.0, abs=1e-7)
    assert sol.kkt <= KKT_TOL


def test_penetration_cap_binds_when_dg_cheap(e2c1):
    # DG marginal cost is far below thermal, so without the cap it would
    # absorb far more than the 5% share
    sol = solve(assemble(e2c1, 12, (1, 1, 1, 1, 1)))
    dg = sol.dispatch[5]
    thermal = float(np.sum(sol.dispatch[:5]))
    assert dg <= e2c1.eta_max * (thermal + dg) + 1e-6
    assert "penetration" in sol.active_set


def test_dg_never_exceeds_cap(e2c1):
    for t in (6, 9, 12, 15):
        sol = solve(assemble(e2c1, t, (1, 1, 1, 1, 1)))
        assert sol.dispatch[5] <= e2c1.period(t).dg_max + 1e-9


def test_ramp_rows_only_when_enforced(e1c1, e2c1):
    import dataclasses

    base = e2c1.units[0]
    ramped = dataclasses.replace(base, ramp_up=50.0, ramp_down=60.0)
    s = dataclasses.replace(
        e2c1,
        units=(ramped,) + e2c1.units[1:],
        ramp_enforced=True,
    )
    prev = np.array([400.0, 200.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    q = assemble(s, 2, (1, 1, 0, 0, 0), prev)
    assert "ramp_up[0]" in q.labels and "ramp_dn[0]" in q.labels
    # unit 2 has no ramp limits; unit starting from 0 gets no rows either
    assert not any(lbl.startswith("ramp") and "[1]" in lbl for lbl in q.labels)
    sol = solve(q)
    assert sol.dispatch[0] <= 450.0 + 1e-9
    assert sol.dispatch[0] >= 340.0 - 1e-9
    # relaxed assembly ignores the flag
    q_rel = assemble(s, 2, (1, 1, 0, 0, 0), None)
    assert not any(lbl.startswith("ramp") for lbl in q_rel.labels)


def test_ramp_window_can_cut_off_mode(e1c1):
    import dataclasses

    ramped = dataclasses.replace(e1c1.units[0], ramp_up=100.0)
    s = dataclasses.replace(e1c1, units=(ramped, e1c1.units[1]), ramp_enforced=True)
    # unit 1 at 150 cannot reach 300 in one step if unit 2 is off at t=4
    prev = np.array([150.0, 550.0, 0.0, 0.0])
    sol = solve(assemble(s, 4, (1, 0), prev))
    assert sol.status == "infeasible"


def test_kkt_residual_recomputable(e2c2):
    q = assemble(e2c2, 9, (1, 1, 1, 0, 1))
    sol = solve(q)
    assert sol.status == "optimal"
    assert kkt_residual(q, sol) == pytest.approx(sol.kkt, abs=1e-12)


def test_solution_unique_under_row_permutation(e2c1):
    # same constraint set in a different row order must give the same point
    q = assemble(e2c1, 12, (1, 1, 1, 1, 1))
    sol = solve(q)
    perm = np.random.default_rng(3).permutation(len(q.h))
    import dataclasses

    q2 = dataclasses.replace(
        q,
        G=q.G[perm],
        h=q.h[perm],
        labels=tuple(q.labels[i] for i in perm),
    )
    sol2 = solve(q2)
    assert np.allclose(sol.dispatch, sol2.dispatch, atol=1e-6)
    assert sol.objective_value == pytest.approx(sol2.objective_value, abs=1e-6)


def test_dispatch_stable_under_demand_nudge(e2c1):
    # strictly convex QP: the minimizer moves O(delta) for a demand of
    # delta; the ratio stays bounded as delta shrinks
    import dataclasses

    base = solve(assemble(e2c1, 9, (1, 1, 1, 1, 1))).dispatch
    for delta in (1e-2, 1e-4, 1e-6):
        per = e2c1.periods[8]
        bumped = dataclasses.replace(per, demand=per.demand + delta)
        s = dataclasses.replace(
            e2c1, periods=e2c1.periods[:8] + (bumped,) + e2c1.periods[9:]
        )
        moved = solve(assemble(s, 9, (1, 1, 1, 1, 1))).dispatch
        drift = float(np.max(np.abs(moved - base)))
        assert drift <= 10.0 * delta + 1e-12


def test_backends_bit_identical(e2c1):
    if not _kernels.HAS_NUMBA:
        pytest.skip("numba unavailable")
    for t in (1, 9, 12, 20):
        for v in range(32):
            bits = tuple((v >> (4 - i)) & 1 for i in range(5))
            q = assemble(e2c1, t, bits)
            if q.n_free == 0:
                continue
            m = len(q.h)
            C = np.empty((m + 1, q.n_free))
            b = np.empty(m + 1)
            C[0, :] = 1.0
            b[0] = q.beq
            C[1:, :] = -q.G
            b[1:] = -q.h
            args = (
                np.ascontiguousarray(q.hdiag), np.ascontiguousarray(q.glin),
                np.ascontiguousarray(C), np.ascontiguousarray(b),
                1, FEAS_TOL, PIVOT_TOL, 100 + 50 * (m + 1),
            )
            res_nb = _kernels.qp_core_numba(*args)
            res_np = _kernels.qp_core_numpy(*args)
            assert res_nb[0] == res_np[0]
            assert np.array_equal(res_nb[1], res_np[1])  # bitwise, not approx
            assert np.array_equal(res_nb[2], res_np[2])
            assert res_nb[3] == res_np[3]
