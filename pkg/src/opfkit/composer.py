"""Composite problem builders: time, contingency, and scenario coupling.

Every composite is block-diagonal per stage (one full ACOPF per
(scenario, contingency, period) triple) plus linear two-stage coupling
rows on generator set-points:

* Ramp rows chain consecutive periods of one (scenario, contingency):
  |Pg_t - Pg_{t-1}| <= ramp_30 * (dt/30) / base_mva.
* Contingency rows tie each post-contingency stage to its base stage at
  the first period only.  Corrective mode uses a two-sided box of width
  ramp_30 / base_mva; preventive mode pins Pg of every surviving
  generator not on the reference bus (reference machines absorb the
  mismatch), optionally also pinning VM at generator buses.
* Scenario rows tie each scenario's base stage to the most probable
  scenario (ties to the lowest id) with a Pg box of the same 30-minute
  width, regardless of mode.

The composite constraint vector is [stage equalities..., pins,
stage inequalities..., boxes]; coupling rows always read
child - base, so the Jacobian entries are +1 on the later stage and -1
on the earlier one.  Scenario weights are normalized to sum to one and
scale both the stage objectives and their Hessian blocks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .acopf import AcopfLayout, build_acopf
from .errors import EmptyScenarioSet, InvalidPlan, TopologyMismatch
from .inputs import ContingencySet, ScenarioSet
from .ipm import SolverOptions  # noqa: F401  (re-exported for callers)
from .network import (
    REF,
    Contingency,
    NetworkCase,
    Scenario,
    apply_contingency,
    apply_scenario,
)
from .nlp import NlpProblem

PREVENTIVE = "preventive"
CORRECTIVE = "corrective"

RAMP = "Ramp"
CONTINGENCY_BOX = "ContingencyBox"
SCENARIO_BOX = "ScenarioBox"
PREVENTIVE_PIN = "PreventivePin"


@dataclass(frozen=True)
class CouplingMode:
    kind: str = CORRECTIVE
    pin_voltages: bool = False
    # multipliers on the 30-minute ramp width used for the contingency
    # and scenario deviation bounds
    contingency_scale: float = 1.0
    scenario_scale: float = 1.0

    def __post_init__(self):
        if self.kind not in (PREVENTIVE, CORRECTIVE):
            raise InvalidPlan(f"unknown coupling kind {self.kind!r}")


@dataclass(frozen=True)
class StageSpec:
    scenario: Scenario | None
    contingency: Contingency | None
    period: int
    dt_minutes: float
    case: NetworkCase


@dataclass(frozen=True)
class CouplingRow:
    """One cross-stage constraint row.

    row is the absolute index into the stacked [equalities;
    inequalities] composite constraint vector; the row value is always
    (stage_a quantity) - (stage_b quantity) with stage_a the later or
    child stage.  gen and bus are positions into the full element lists
    of the input case; exactly one of them is set.
    """
    kind: str
    stage_a: int
    stage_b: int
    gen: int | None
    bus: int | None
    bound: float
    row: int
    is_equality: bool


@dataclass(frozen=True)
class CompositeIndexMap:
    stages: tuple[StageSpec, ...]
    var_offset: tuple[int, ...]
    eq_offset: tuple[int, ...]      # into the equality region
    ineq_offset: tuple[int, ...]    # into the inequality region
    coupling_rows: tuple[CouplingRow, ...]
    weights: tuple[float, ...]      # per-stage objective weights
    layouts: tuple[AcopfLayout, ...]
    n_vars: int
    m_eq: int
    m_ineq: int


def _check_topology(ref: NetworkCase, other: NetworkCase) -> None:
    same = (ref.base_mva == other.base_mva
            and len(ref.buses) == len(other.buses)
            and len(ref.gens) == len(other.gens)
            and len(ref.branches) == len(other.branches)
            and all(a.id == b.id and a.btype == b.btype
                    for a, b in zip(ref.buses, other.buses))
            and all(a.bus == b.bus and a.status == b.status
                    for a, b in zip(ref.gens, other.gens))
            and all(a.fbus == b.fbus and a.tbus == b.tbus
                    and a.status == b.status
                    for a, b in zip(ref.branches, other.branches)))
    if not same:
        raise TopologyMismatch(
            "periods must share one topology (loads may differ)")


def _live_both(a: NetworkCase, b: NetworkCase) -> list[int]:
    return [i for i, (ga, gb) in enumerate(zip(a.gens, b.gens))
            if ga.status != 0 and gb.status != 0]


@dataclass
class _PendingRow:
    kind: str
    stage_a: int
    stage_b: int
    gen: int | None
    bus: int | None
    bound: float
    is_equality: bool


class _Builder:
    def __init__(self, name: str):
        self.name = name
        self.specs: list[StageSpec] = []
        self.weights: list[float] = []
        self.rows: list[_PendingRow] = []

    def add_stage(self, spec: StageSpec, weight: float) -> int:
        self.specs.append(spec)
        self.weights.append(weight)
        return len(self.specs) - 1

    def ramp_rows(self, child: int, base: int, dt_minutes: float) -> None:
        case = self.specs[base].case
        for gp in _live_both(self.specs[child].case, case):
            bound = case.gens[gp].ramp_30 * (dt_minutes / 30.0) / case.base_mva
            self.rows.append(_PendingRow(RAMP, child, base, gp, None,
                                         bound, False))

    def mode_rows(self, child: int, base: int, mode: CouplingMode,
                  box_kind: str = CONTINGENCY_BOX,
                  scale: float | None = None) -> None:
        base_case = self.specs[base].case
        child_case = self.specs[child].case
        live = _live_both(child_case, base_case)
        if mode.kind == CORRECTIVE:
            mult = mode.contingency_scale if scale is None else scale
            for gp in live:
                bound = base_case.gens[gp].ramp_30 * mult / base_case.base_mva
                self.rows.append(_PendingRow(box_kind, child, base, gp,
                                             None, bound, False))
            return
        for gp in live:
            bus_pos = base_case.bus_pos[base_case.gens[gp].bus]
            if base_case.buses[bus_pos].btype == REF:
                continue    # reference machines absorb the mismatch
            self.rows.append(_PendingRow(PREVENTIVE_PIN, child, base, gp,
                                         None, 0.0, True))
        if mode.pin_voltages:
            live_buses = sorted({base_case.bus_pos[base_case.gens[gp].bus]
                                 for gp in live})
            for bp in live_buses:
                self.rows.append(_PendingRow(PREVENTIVE_PIN, child, base,
                                             None, bp, 0.0, True))

    def scenario_rows(self, child: int, base: int,
                      mode: CouplingMode) -> None:
        base_case = self.specs[base].case
        for gp in _live_both(self.specs[child].case, base_case):
            bound = (base_case.gens[gp].ramp_30 * mode.scenario_scale
                     / base_case.base_mva)
            self.rows.append(_PendingRow(SCENARIO_BOX, child, base, gp,
                                         None, bound, False))

    def assemble(self) -> tuple[NlpProblem, CompositeIndexMap]:
        specs = self.specs
        built = [build_acopf(s.case) for s in specs]
        probs = [b[0] for b in built]
        layouts = [b[1] for b in built]
        ns = len(specs)

        var_off = np.zeros(ns, dtype=int)
        eq_off = np.zeros(ns, dtype=int)
        ineq_off = np.zeros(ns, dtype=int)
        for k in range(1, ns):
            var_off[k] = var_off[k - 1] + probs[k - 1].n
            eq_off[k] = eq_off[k - 1] + probs[k - 1].m_eq
            ineq_off[k] = ineq_off[k - 1] + probs[k - 1].m_ineq
        nv = int(var_off[-1] + probs[-1].n)
        me_stage = int(eq_off[-1] + probs[-1].m_eq)
        mi_stage = int(ineq_off[-1] + probs[-1].m_ineq)

        pins = [r for r in self.rows if r.is_equality]
        boxes = [r for r in self.rows if not r.is_equality]
        m_eq = me_stage + len(pins)
        m_ineq = mi_stage + len(boxes)

        def var_of(r: _PendingRow, stage: int) -> int:
            lay = layouts[stage]
            pos = lay.pg[r.gen] if r.gen is not None else lay.vm[r.bus]
            return int(var_off[stage] + pos)

        coupling: list[CouplingRow] = []
        c_rows, c_cols, c_vals = [], [], []
        for i, r in enumerate(pins + boxes):
            row = me_stage + i if r.is_equality else m_eq + mi_stage + (
                i - len(pins))
            va, vb = var_of(r, r.stage_a), var_of(r, r.stage_b)
            coupling.append(CouplingRow(
                kind=r.kind, stage_a=r.stage_a, stage_b=r.stage_b,
                gen=r.gen, bus=r.bus, bound=r.bound, row=row,
                is_equality=r.is_equality))
            c_rows += [row, row]
            c_cols += [va, vb]
            c_vals += [1.0, -1.0]
        c_rows = np.asarray(c_rows, dtype=int)
        c_cols = np.asarray(c_cols, dtype=int)
        c_vals = np.asarray(c_vals)

        w = np.asarray(self.weights)
        xl = np.concatenate([p.xl for p in probs])
        xu = np.concatenate([p.xu for p in probs])
        x0 = np.concatenate([p.x0 for p in probs])
        gl = np.concatenate([p.gl for p in probs]
                            + [np.array([-r.bound for r in boxes])])
        gu = np.concatenate([p.gu for p in probs]
                            + [np.array([r.bound for r in boxes])])

        slices = [(int(var_off[k]), int(var_off[k]) + probs[k].n)
                  for k in range(ns)]

        def objective(x: np.ndarray) -> float:
            return float(sum(w[k] * probs[k].objective(x[a:b])
                             for k, (a, b) in enumerate(slices)))

        def gradient(x: np.ndarray) -> np.ndarray:
            out = np.zeros(nv)
            for k, (a, b) in enumerate(slices):
                out[a:b] = w[k] * probs[k].gradient(x[a:b])
            return out

        def constraints(x: np.ndarray) -> np.ndarray:
            out = np.zeros(m_eq + m_ineq)
            for k, (a, b) in enumerate(slices):
                c = probs[k].constraints(x[a:b])
                mk = probs[k].m_eq
                out[eq_off[k]:eq_off[k] + mk] = c[:mk]
                start = m_eq + ineq_off[k]
                out[start:start + probs[k].m_ineq] = c[mk:]
            if coupling:
                vals = x[c_cols[0::2]] - x[c_cols[1::2]]
                out[c_rows[0::2]] = vals
            return out

        def jacobian(x: np.ndarray) -> sp.csr_matrix:
            rows_l, cols_l, vals_l = [c_rows], [c_cols], [c_vals]
            for k, (a, b) in enumerate(slices):
                jk = probs[k].jacobian(x[a:b]).tocoo()
                mk = probs[k].m_eq
                in_eq = jk.row < mk
                grow = np.where(in_eq, eq_off[k] + jk.row,
                                m_eq + ineq_off[k] + (jk.row - mk))
                rows_l.append(grow)
                cols_l.append(a + jk.col)
                vals_l.append(jk.data)
            return sp.csr_matrix(
                (np.concatenate(vals_l),
                 (np.concatenate(rows_l), np.concatenate(cols_l))),
                shape=(m_eq + m_ineq, nv))

        def lagrangian_hessian(x: np.ndarray, obj_factor: float,
                               mult: np.ndarray) -> sp.csr_matrix:
            rows_l, cols_l, vals_l = [], [], []
            for k, (a, b) in enumerate(slices):
                mk, ik = probs[k].m_eq, probs[k].m_ineq
                mult_k = np.concatenate([
                    mult[eq_off[k]:eq_off[k] + mk],
                    mult[m_eq + ineq_off[k]:m_eq + ineq_off[k] + ik]])
                hk = probs[k].lagrangian_hessian(
                    x[a:b], obj_factor * w[k], mult_k).tocoo()
                rows_l.append(a + hk.row)
                cols_l.append(a + hk.col)
                vals_l.append(hk.data)
            return sp.csr_matrix(
                (np.concatenate(vals_l),
                 (np.concatenate(rows_l), np.concatenate(cols_l))),
                shape=(nv, nv))

        problem = NlpProblem(
            n=nv, m_eq=m_eq, m_ineq=m_ineq, xl=xl, xu=xu, gl=gl, gu=gu,
            x0=x0, objective=objective, gradient=gradient,
            constraints=constraints, jacobian=jacobian,
            lagrangian_hessian=lagrangian_hessian, name=self.name)
        index = CompositeIndexMap(
            stages=tuple(specs), var_offset=tuple(int(v) for v in var_off),
            eq_offset=tuple(int(v) for v in eq_off),
            ineq_offset=tuple(int(v) for v in ineq_off),
            coupling_rows=tuple(coupling), weights=tuple(float(v) for v in w),
            layouts=tuple(layouts), n_vars=nv, m_eq=m_eq, m_ineq=m_ineq)
        return problem, index


def _scenario_order(scenarios: ScenarioSet | None) -> list[tuple[Scenario | None, float]]:
    """(scenario, normalized weight) with the base scenario first."""
    if scenarios is None:
        return [(None, 1.0)]
    items = list(scenarios.scenarios)
    if not items:
        raise EmptyScenarioSet("no scenarios to compose")
    total = sum(s.weight for s in items)
    if not total > 0.0:
        raise EmptyScenarioSet("scenario weights sum to zero")
    base = scenarios.base_index()
    rest = sorted((s for i, s in enumerate(items) if i != base),
                  key=lambda s: s.id)
    return [(s, s.weight / total) for s in [items[base]] + rest]


def _ctg_order(ctgs: ContingencySet | None) -> list[Contingency | None]:
    if ctgs is None:
        return [None]
    return [None] + list(ctgs.by_id())


def _general_impl(scenarios: ScenarioSet | None, ctgs: ContingencySet | None,
                  periods: list[NetworkCase], mode: CouplingMode,
                  dt_minutes: float, name: str):
    if not periods:
        raise InvalidPlan("at least one period is required")
    nt = len(periods)
    if nt > 1 and not dt_minutes > 0:
        raise InvalidPlan("dt_minutes must be positive for multiple periods")
    for t in range(1, nt):
        _check_topology(periods[0], periods[t])

    b = _Builder(name)
    stage_of: dict[tuple[int, int, int], int] = {}
    scen_order = _scenario_order(scenarios)
    for s_pos, (scen, weight) in enumerate(scen_order):
        scen_periods = [apply_scenario(p, scen) if scen else p
                        for p in periods]
        for c_pos, ctg in enumerate(_ctg_order(ctgs)):
            stage_periods = ([apply_contingency(p, ctg) for p in scen_periods]
                             if ctg else scen_periods)
            for t in range(nt):
                k = b.add_stage(StageSpec(
                    scenario=scen, contingency=ctg, period=t,
                    dt_minutes=dt_minutes, case=stage_periods[t]), weight)
                stage_of[(s_pos, c_pos, t)] = k

    n_s = len(scen_order)
    n_c = len(_ctg_order(ctgs))
    for s_pos in range(n_s):
        for c_pos in range(n_c):
            for t in range(1, nt):
                b.ramp_rows(stage_of[(s_pos, c_pos, t)],
                            stage_of[(s_pos, c_pos, t - 1)], dt_minutes)
        for c_pos in range(1, n_c):
            b.mode_rows(stage_of[(s_pos, c_pos, 0)],
                        stage_of[(s_pos, 0, 0)], mode)
        if s_pos > 0:
            b.scenario_rows(stage_of[(s_pos, 0, 0)], stage_of[(0, 0, 0)],
                            mode)
    return b.assemble()


def compose_multiperiod(cases: list[NetworkCase], dt_minutes: float):
    """Ramp-coupled horizon; one stage per period, loads may vary."""
    return _general_impl(None, None, list(cases), CouplingMode(),
                         dt_minutes, f"tcopf(nt={len(cases)})")


def compose_scopf(base: NetworkCase, ctgs: ContingencySet,
                  mode: CouplingMode):
    """Base plus post-contingency stages coupled at the base point."""
    return _general_impl(None, ctgs, [base], mode, 30.0,
                         f"scopf(nc={len(ctgs)})")


def compose_multiperiod_scopf(base_periods: list[NetworkCase],
                              ctgs: ContingencySet, mode: CouplingMode,
                              dt_minutes: float):
    """Every (contingency, period) stage; contingency coupling at the
    first period only, ramp chains within each contingency."""
    return _general_impl(
        None, ctgs, list(base_periods), mode, dt_minutes,
        f"tcopf-scopf(nc={len(ctgs)},nt={len(base_periods)})")


def compose_sopf_full(base: NetworkCase, scenarios: ScenarioSet,
                      ctgs: ContingencySet | None, mode: CouplingMode):
    """Three-stage tree: contingencies couple to their scenario base,
    scenario bases couple to the most probable scenario."""
    nc = 0 if ctgs is None else len(ctgs)
    return _general_impl(scenarios, ctgs, [base], mode, 30.0,
                         f"sopf-full(ns={len(scenarios)},nc={nc})")


def compose_general(scenarios: ScenarioSet | None,
                    ctgs: ContingencySet | None,
                    periods: list[NetworkCase], mode: CouplingMode,
                    dt_minutes: float):
    """Full (scenario, contingency, period) lattice."""
    n_s = 1 if scenarios is None else len(scenarios)
    n_c = 0 if ctgs is None else len(ctgs)
    return _general_impl(
        scenarios, ctgs, list(periods), mode, dt_minutes,
        f"sopf-general(ns={n_s},nc={n_c},nt={len(periods)})")


def compose_sopf_flat(base: NetworkCase, scenarios: ScenarioSet,
                      ctgs: ContingencySet | None, mode: CouplingMode):
    """Flattened stochastic composite: all (scenario, contingency)
    stages couple directly to the most probable scenario's base stage."""
    b = _Builder(f"sopf-flat(ns={len(scenarios)},"
                 f"nc={0 if ctgs is None else len(ctgs)})")
    stage_ids: list[tuple[int, int, int]] = []
    for s_pos, (scen, weight) in enumerate(_scenario_order(scenarios)):
        scen_case = apply_scenario(base, scen) if scen else base
        for c_pos, ctg in enumerate(_ctg_order(ctgs)):
            case = apply_contingency(scen_case, ctg) if ctg else scen_case
            k = b.add_stage(StageSpec(
                scenario=scen, contingency=ctg, period=0,
                dt_minutes=30.0, case=case), weight)
            stage_ids.append((s_pos, c_pos, k))
    for s_pos, c_pos, k in stage_ids:
        if k == 0:
            continue
        box_kind = CONTINGENCY_BOX if c_pos > 0 else SCENARIO_BOX
        b.mode_rows(k, 0, mode, box_kind=box_kind,
                    scale=(mode.contingency_scale if c_pos > 0
                           else mode.scenario_scale))
    return b.assemble()
