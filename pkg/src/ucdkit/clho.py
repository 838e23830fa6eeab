"""Closed-loop scheduling on a trained value approximation.

Training runs backward over the horizon. For each period t and each
candidate previous mode, it samples dispatch states, evaluates the exact
one-step target

    y(P) = min_I  Q(f_I(P), I) + kappa(I_prev, I) + Jhat_{t+1}(f_I(P), I)

and fits the basis weights by least squares. Scheduling is then a single
one-step argmin per period against the trained tail values; new initial
states or mid-horizon disturbances need no retraining.

The default basis is quadratic-diagonal: a square and a linear feature
per active dispatch coordinate plus a constant.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .costs import running_cost, switching_cost
from .errors import InfeasibleModeError, ModelMismatchError, UcdError
from .hybrid import int_to_mode, mode_to_int
from .qp import mode_candidates
from .scenario import Scenario, scenario_fingerprint

__all__ = [
    "BasisSpec",
    "TrainConfig",
    "ValueModel",
    "default_basis",
    "basis_vector",
    "train",
    "approx_value",
    "schedule_step",
    "save_model",
    "load_model",
    "MODEL_FORMAT_VERSION",
]

log = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1
TIE_RTOL = 1e-9


@dataclass(frozen=True)
class BasisSpec:
    """Feature map over the dispatch vector.

    coords lists the dispatch indices (0..N-1 thermal, N dg, N+1 dr) that
    contribute a square and a linear feature; one constant feature closes
    the list.
    """

    family: str = "quad"
    coords: tuple[int, ...] = ()

    @property
    def n_features(self) -> int:
        return 2 * len(self.coords) + 1


def default_basis(s: Scenario) -> BasisSpec:
    """Squares and linears of every thermal coordinate, plus dg/dr when
    the scenario ever offers them, plus a constant."""
    coords = list(range(s.n_units))
    if s.has_dg():
        coords.append(s.n_units)
    if s.has_dr():
        coords.append(s.n_units + 1)
    return BasisSpec(family="quad", coords=tuple(coords))


def basis_vector(spec: BasisSpec, dispatch) -> np.ndarray:
    if spec.family != "quad":
        raise UcdError(f"unknown basis family {spec.family!r}")
    d = np.asarray(dispatch, dtype=float)
    out = np.empty(spec.n_features)
    k = len(spec.coords)
    for j, c in enumerate(spec.coords):
        out[j] = d[c] * d[c]
        out[k + j] = d[c]
    out[2 * k] = 1.0
    return out


@dataclass(frozen=True)
class TrainConfig:
    samples: int = 100
    regularization: float = 0.0
    seed: int = 0
    basis: BasisSpec | None = None   # None = default for the scenario


@dataclass
class ValueModel:
    """Trained tail-cost approximation Jhat_t(P, I_prev) = w(t,I_prev) . phi(P)."""

    basis: BasisSpec
    horizon: int
    n_units: int
    weights: dict        # (t, mode int) -> np.ndarray of length n_features
    fingerprint: str
    seed: int
    samples: int
    regularization: float
    diagnostics: dict = field(default_factory=dict)


def _stage_prev_modes(s: Scenario, layers):
    """Candidate previous modes per stage: anything for t=1 (callers may
    start from arbitrary states), the feasible modes of t-1 afterwards."""
    prev = {1: list(range(1 << s.n_units))}
    for t in range(2, s.horizon + 1):
        prev[t] = [mode_to_int(m) for m, _, _ in layers[t - 1]]
    return prev


def _sample_states(s: Scenario, t: int, i_prev_bits, rng, count):
    """Dispatch states distributed like the reachable set entering t:
    committed units uniform over their capacity, others exactly 0, dg/dr
    uniform over the previous period's caps."""
    per = s.period(max(t - 1, 1))
    states = np.zeros((count, s.n_units + 2))
    for n, u in enumerate(s.units):
        if i_prev_bits[n]:
            states[:, n] = rng.uniform(u.p_min, u.p_max, size=count)
    if per.dg_max > 0.0:
        states[:, s.n_units] = rng.uniform(0.0, per.dg_max, size=count)
    if per.dr_max > 0.0:
        states[:, s.n_units + 1] = rng.uniform(0.0, per.dr_max, size=count)
    return states


def train(s: Scenario, config: TrainConfig | None = None) -> ValueModel:
    """Fit the value approximation backward over the horizon.

    Deterministic: the sample streams are seeded per (seed, t, I_prev), so
    identical scenario and config reproduce the model bit for bit.
    """
    cfg = config or TrainConfig()
    if cfg.samples < 1:
        raise UcdError("training needs at least one sample per state")
    basis = cfg.basis or default_basis(s)
    nf = basis.n_features

    # ramp-relaxed candidates per period; also the existence check
    layers = {}
    for t in range(1, s.horizon + 1):
        cands = mode_candidates(s, t, None)
        if not cands:
            raise UcdError(f"no feasible commitment at period t={t}; cannot train")
        layers[t] = cands
    prev_modes = _stage_prev_modes(s, layers)

    weights = {}
    discarded = {}
    rank_deficient = []
    for t in range(s.horizon, 0, -1):
        # tail values at the successor states; without ramp coupling both
        # the dispatch and the tail term are per-(t, I) constants
        relaxed_tail = None
        if not s.ramp_enforced:
            relaxed_tail = []
            for mode, dispatch, q in layers[t]:
                jt = _tail_value(basis, weights, s.horizon, t + 1, mode, dispatch)
                relaxed_tail.append((mode, q + jt))
        for ip in prev_modes[t]:
            ip_bits = int_to_mode(ip, s.n_units)
            rng = np.random.default_rng((cfg.seed, t, ip))
            states = _sample_states(s, t, ip_bits, rng, cfg.samples)
            ys = np.empty(cfg.samples)
            keep = np.ones(cfg.samples, dtype=bool)
            if relaxed_tail is not None:
                best = np.inf
                for mode, base in relaxed_tail:
                    v = base + switching_cost(s, ip_bits, mode)
                    if v < best:
                        best = v
                ys[:] = best
            else:
                for k in range(cfg.samples):
                    best = np.inf
                    for mode, dispatch, q in mode_candidates(s, t, states[k]):
                        v = (q + switching_cost(s, ip_bits, mode)
                             + _tail_value(basis, weights, s.horizon, t + 1, mode, dispatch))
                        if v < best:
                            best = v
                    if np.isfinite(best):
                        ys[k] = best
                    else:
                        keep[k] = False
                if not keep.all():
                    dropped = int((~keep).sum())
                    discarded[(t, ip)] = dropped
                    log.warning("discarded %d/%d samples with empty feasible set "
                                "at t=%d, I_prev=%s", dropped, cfg.samples, t,
                                "".join(map(str, ip_bits)))
            if not keep.any():
                raise UcdError(
                    f"every sampled state at t={t}, "
                    f"I_prev={''.join(map(str, ip_bits))} was infeasible"
                )
            X = np.stack([basis_vector(basis, st) for st in states[keep]])
            y = ys[keep]
            if cfg.regularization > 0.0:
                A = X.T @ X + cfg.regularization * np.eye(nf)
                w = np.linalg.solve(A, X.T @ y)
                rank = nf
            else:
                w, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
            if rank < nf:
                rank_deficient.append((t, ip))
                log.info("rank-deficient fit at t=%d, I_prev=%s (rank %d of %d); "
                         "minimum-norm solution used", t, "".join(map(str, ip_bits)),
                         rank, nf)
            weights[(t, ip)] = w

    return ValueModel(
        basis=basis, horizon=s.horizon, n_units=s.n_units, weights=weights,
        fingerprint=scenario_fingerprint(s), seed=cfg.seed, samples=cfg.samples,
        regularization=cfg.regularization,
        diagnostics={
            "discarded": {f"{t}:{ip}": c for (t, ip), c in discarded.items()},
            "rank_deficient": [f"{t}:{ip}" for t, ip in rank_deficient],
        },
    )


def _tail_value(basis, weights, horizon, t, mode, dispatch):
    if t > horizon:
        return 0.0
    w = weights.get((t, mode_to_int(mode)))
    if w is None:
        raise ModelMismatchError(
            f"model holds no weights for t={t}, "
            f"I_prev={''.join(str(b) for b in mode)}"
        )
    return float(np.dot(w, basis_vector(basis, dispatch)))


def approx_value(model: ValueModel, t: int, i_prev, dispatch) -> float:
    """Jhat_t evaluated at a dispatch state; 0 beyond the horizon."""
    if t == model.horizon + 1:
        return 0.0
    if not 1 <= t <= model.horizon:
        raise UcdError(f"t={t} outside 1..{model.horizon + 1}")
    return _tail_value(model.basis, model.weights, model.horizon, t,
                       tuple(int(b) for b in i_prev), dispatch)


def schedule_step(model: ValueModel, s: Scenario, t: int, i_prev, p_prev):
    """One closed-loop decision: the mode and dispatch minimizing stage
    cost plus the trained tail value. Ties break to the smallest mode
    as a binary integer, matching the oracles."""
    ip_bits = tuple(int(b) for b in i_prev)
    best = np.inf
    chosen = None
    for mode, dispatch, q in mode_candidates(s, t, p_prev):
        v = (q + switching_cost(s, ip_bits, mode)
             + _tail_value(model.basis, model.weights, model.horizon,
                           t + 1, mode, dispatch))
        if chosen is None or v < best - TIE_RTOL * max(1.0, abs(best)):
            best = v
            chosen = (mode, dispatch)
        # candidates arrive in ascending binary order, so on a tie the
        # incumbent already is the lexicographic winner
    if chosen is None:
        raise InfeasibleModeError(t, ip_bits, "no feasible successor mode")
    return chosen


def save_model(model: ValueModel, path) -> None:
    """Self-describing JSON document; floats survive bit for bit."""
    doc = {
        "format": "ucdkit-value-model",
        "format_version": MODEL_FORMAT_VERSION,
        "fingerprint": model.fingerprint,
        "horizon": model.horizon,
        "n_units": model.n_units,
        "seed": model.seed,
        "samples": model.samples,
        "regularization": model.regularization,
        "basis": {"family": model.basis.family, "coords": list(model.basis.coords)},
        "weights": {
            f"{t}:{ip}": [float(v) for v in w]
            for (t, ip), w in sorted(model.weights.items())
        },
        "diagnostics": model.diagnostics,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_model(path, scenario: Scenario | None = None, force: bool = False) -> ValueModel:
    """Read a stored model.

    When a scenario is supplied, its fingerprint must match the one the
    model was trained on; pass force=True to override deliberately.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelMismatchError(f"cannot read model document: {exc}") from exc
    if doc.get("format") != "ucdkit-value-model":
        raise ModelMismatchError("not a value model document")
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise ModelMismatchError(
            f"unsupported model format version {doc.get('format_version')!r}"
        )
    if scenario is not None and not force:
        fp = scenario_fingerprint(scenario)
        if fp != doc.get("fingerprint"):
            raise ModelMismatchError(
                "model was trained on a different scenario (fingerprint "
                f"{doc.get('fingerprint', '')[:12]}... vs {fp[:12]}...); "
                "pass force to use it anyway"
            )
    basis = BasisSpec(family=doc["basis"]["family"],
                      coords=tuple(int(c) for c in doc["basis"]["coords"]))
    weights = {}
    for key, vals in doc["weights"].items():
        t_s, ip_s = key.split(":")
        weights[(int(t_s), int(ip_s))] = np.array([float(v) for v in vals])
    return ValueModel(
        basis=basis, horizon=int(doc["horizon"]), n_units=int(doc["n_units"]),
        weights=weights, fingerprint=doc["fingerprint"], seed=int(doc["seed"]),
        samples=int(doc["samples"]), regularization=float(doc["regularization"]),
        diagnostics=doc.get("diagnostics", {}),
    )
