"""AC optimal power flow in polar voltage coordinates.

One stage = one NetworkCase turned into a smooth NLP:

    variables   VA, VM per active bus; PG, QG per in-service generator
    objective   sum of polynomial generator costs ($/h)
    equalities  per-bus active/reactive power balance
                sum Pg - Pd/base - P_inj(V, theta) = 0 (Q likewise)
    inequalities |S_from|^2 and |S_to|^2 <= (rateA/base)^2 per rated
                in-service branch
    bounds      VM in [Vmin, Vmax], PG/QG in per-unit generator limits,
                reference bus angles pinned to their case values

P_inj includes series branch flows, line charging, taps/shifts and the
bus shunt (gs + j bs) scaled by |V|^2.  Gradient, Jacobian and
Lagrangian Hessian are analytic; sparsity patterns are fixed at build
time and only the numeric values change between evaluation points.

Branch flow quantities use, with theta = theta_f - theta_t and
admittance components yff = gff + j bff etc.:

    u  = gft cos + bft sin        w  = gft sin - bft cos
    u2 = gtf cos - btf sin        w2 = -(gtf sin + btf cos)
    Pf = gff Vf^2 + Vf Vt u       Qf = -bff Vf^2 + Vf Vt w
    Pt = gtt Vt^2 + Vf Vt u2      Qt = -btt Vt^2 + Vf Vt w2
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import matpower
from .errors import DimensionMismatch, Disconnected
from .network import (
    ISOLATED,
    REF,
    NetworkCase,
    branch_admittance,
    check_connectivity,
)
from .nlp import NlpProblem

# unique upper-triangle positions of a 4x4 block over (tf, tt, vf, vt)
_POSITIONS = ((0, 0), (0, 1), (0, 2), (0, 3), (1, 1), (1, 2), (1, 3),
              (2, 2), (2, 3), (3, 3))


@dataclass(frozen=True)
class AcopfLayout:
    """Index maps from network elements to NLP positions.

    Keys are positions into case.buses / case.gens / case.branches.
    Out-of-service and isolated elements are absent from the maps.
    """

    n_vars: int
    n_eq: int
    n_ineq: int
    va: dict[int, int]
    vm: dict[int, int]
    pg: dict[int, int]
    qg: dict[int, int]
    p_row: dict[int, int]
    q_row: dict[int, int]
    sf_row: dict[int, int]
    st_row: dict[int, int]
    ref_buses: tuple[int, ...]


class _Engine:
    """Precomputed arrays and vectorized callbacks for one case."""

    def __init__(self, case: NetworkCase):
        base = case.base_mva
        self.case = case
        self.base = base

        active = [i for i, b in enumerate(case.buses) if b.btype != ISOLATED]
        slot = {pos: k for k, pos in enumerate(active)}
        nb = len(active)
        self.active, self.slot, self.nb = active, slot, nb

        live_g = [j for j, g in enumerate(case.gens) if g.status != 0]
        ng = len(live_g)
        self.live_gens, self.ng = live_g, ng

        live_b = []
        for k, br in enumerate(case.branches):
            if br.status == 0:
                continue
            fp, tp = case.bus_pos[br.fbus], case.bus_pos[br.tbus]
            if fp not in slot or tp not in slot:
                raise Disconnected(
                    f"in-service branch {br.fbus}-{br.tbus} touches an "
                    f"isolated bus")
            live_b.append(k)
        nbr = len(live_b)
        self.live_branches, self.nbr = live_b, nbr

        self.n = 2 * nb + 2 * ng
        self.off_vm = nb
        self.off_pg = 2 * nb
        self.off_qg = 2 * nb + ng

        # bus data (active buses, per unit)
        busv = [case.buses[p] for p in active]
        self.pd = np.array([b.pd for b in busv]) / base
        self.qd = np.array([b.qd for b in busv]) / base
        self.gs = np.array([b.gs for b in busv]) / base
        self.bs = np.array([b.bs for b in busv]) / base

        # branch data
        self.fo = np.array([slot[case.bus_pos[case.branches[k].fbus]]
                            for k in live_b], dtype=np.intp)
        self.to = np.array([slot[case.bus_pos[case.branches[k].tbus]]
                            for k in live_b], dtype=np.intp)
        y = [branch_admittance(case.branches[k]) for k in live_b]
        self.gff = np.array([c[0].real for c in y])
        self.bff = np.array([c[0].imag for c in y])
        self.gft = np.array([c[1].real for c in y])
        self.bft = np.array([c[1].imag for c in y])
        self.gtf = np.array([c[2].real for c in y])
        self.btf = np.array([c[2].imag for c in y])
        self.gtt = np.array([c[3].real for c in y])
        self.btt = np.array([c[3].imag for c in y])

        rated = [i for i, k in enumerate(live_b)
                 if case.branches[k].rate_a > 0.0]
        self.rated = np.array(rated, dtype=np.intp)
        self.nr = len(rated)
        self.smax2 = np.array(
            [(case.branches[live_b[i]].rate_a / base) ** 2 for i in rated])

        # generator data (live, per unit)
        gv = [case.gens[j] for j in live_g]
        self.gslot = np.array([slot[case.bus_pos[g.bus]] for g in gv],
                              dtype=np.intp)
        self.cost_a = np.array([g.cost.c2 for g in gv]) * base * base
        self.cost_b = np.array([g.cost.c1 for g in gv]) * base
        self.cost_c = np.array([g.cost.c0 for g in gv])

        self.m_eq = 2 * nb
        self.m_ineq = 2 * self.nr
        self._build_patterns()
        self._build_bounds()

    # --- construction helpers -------------------------------------------

    def _build_patterns(self) -> None:
        nb, nbr, nr, ng = self.nb, self.nbr, self.nr, self.ng
        vaf, vat = self.fo, self.to
        vmf, vmt = self.fo + nb, self.to + nb
        self.axis_cols = (vaf, vat, vmf, vmt)
        prow_f, prow_t = self.fo, self.to
        qrow_f, qrow_t = self.fo + nb, self.to + nb
        self.flow_rows = (prow_f, prow_t, qrow_f, qrow_t)

        # Jacobian: per live branch the four flow quantities each hit
        # one balance row in four columns; then shunts, gens, flow rows.
        jr = [np.repeat(r, 4) for r in self.flow_rows]
        jc = [np.concatenate([c[None, :] for c in self.axis_cols]
                             ).T.ravel()] * 4
        rows = jr + [np.arange(nb), np.arange(nb) + nb]            # shunts
        cols = jc + [np.arange(nb) + nb, np.arange(nb) + nb]
        rows += [self.gslot, self.gslot + nb]                      # gens
        cols += [np.arange(ng) + self.off_pg, np.arange(ng) + self.off_qg]
        if nr:
            sfr = self.m_eq + 2 * np.arange(nr)
            rows += [np.repeat(sfr, 4), np.repeat(sfr + 1, 4)]
            rc = [c[self.rated] for c in self.axis_cols]
            rcols = np.concatenate([c[None, :] for c in rc]).T.ravel()
            cols += [rcols, rcols]
        self.jac_rows = np.concatenate(rows)
        self.jac_cols = np.concatenate(cols)

        # Hessian: 10 unique positions per branch, mirrored; plus the
        # shunt and objective diagonals.
        hr, hc = [], []
        for a, b in _POSITIONS:
            ia, ib = self.axis_cols[a], self.axis_cols[b]
            hr.append(ia)
            hc.append(ib)
            if a != b:
                hr.append(ib)
                hc.append(ia)
        hr.append(np.arange(nb) + nb)          # shunt d2/dVm2
        hc.append(np.arange(nb) + nb)
        hr.append(np.arange(ng) + self.off_pg)  # objective d2/dPg2
        hc.append(np.arange(ng) + self.off_pg)
        self.hess_rows = np.concatenate(hr)
        self.hess_cols = np.concatenate(hc)

    def _build_bounds(self) -> None:
        case, base = self.case, self.base
        nb, ng = self.nb, self.ng
        xl = np.full(self.n, -np.inf)
        xu = np.full(self.n, np.inf)
        x0 = np.zeros(self.n)
        refs = []
        for k, pos in enumerate(self.active):
            b = case.buses[pos]
            x0[k] = b.va
            xl[nb + k], xu[nb + k] = b.vmin, b.vmax
            x0[nb + k] = min(max(b.vm, b.vmin), b.vmax)
            if b.btype == REF:
                xl[k] = xu[k] = b.va
                refs.append(pos)
        for j, gpos in enumerate(self.live_gens):
            g = case.gens[gpos]
            xl[self.off_pg + j] = g.pmin / base
            xu[self.off_pg + j] = g.pmax / base
            x0[self.off_pg + j] = 0.5 * (g.pmin + g.pmax) / base
            xl[self.off_qg + j] = g.qmin / base
            xu[self.off_qg + j] = g.qmax / base
            x0[self.off_qg + j] = 0.5 * (g.qmin + g.qmax) / base
        self.xl, self.xu, self.x0 = xl, xu, x0
        self.ref_positions = tuple(refs)

    # --- evaluation ------------------------------------------------------

    def split(self, x: np.ndarray):
        nb, ng = self.nb, self.ng
        return (x[:nb], x[nb:2 * nb], x[self.off_pg:self.off_pg + ng],
                x[self.off_qg:self.off_qg + ng])

    def first_order(self, va: np.ndarray, vm: np.ndarray):
        """Flow values and their gradients over (tf, tt, vf, vt)."""
        vf, vt = vm[self.fo], vm[self.to]
        th = va[self.fo] - va[self.to]
        cs, sn = np.cos(th), np.sin(th)
        u = self.gft * cs + self.bft * sn
        w = self.gft * sn - self.bft * cs
        u2 = self.gtf * cs - self.btf * sn
        w2 = -(self.gtf * sn + self.btf * cs)
        vv = vf * vt
        pf = self.gff * vf * vf + vv * u
        qf = -self.bff * vf * vf + vv * w
        pt = self.gtt * vt * vt + vv * u2
        qt = -self.btt * vt * vt + vv * w2
        gpf = (-vv * w, vv * w, 2 * self.gff * vf + vt * u, vf * u)
        gqf = (vv * u, -vv * u, -2 * self.bff * vf + vt * w, vf * w)
        gpt = (vv * w2, -vv * w2, vt * u2, 2 * self.gtt * vt + vf * u2)
        gqt = (-vv * u2, vv * u2, vt * w2, -2 * self.btt * vt + vf * w2)
        return {"u": u, "w": w, "u2": u2, "w2": w2, "vf": vf, "vt": vt,
                "vv": vv, "pf": pf, "qf": qf, "pt": pt, "qt": qt,
                "gpf": gpf, "gqf": gqf, "gpt": gpt, "gqt": gqt}

    def injections(self, va: np.ndarray, vm: np.ndarray, fo=None):
        """Per-bus network injections (pu), shunts included."""
        if fo is None:
            fo = self.first_order(va, vm)
        p = np.zeros(self.nb)
        q = np.zeros(self.nb)
        np.add.at(p, self.fo, fo["pf"])
        np.add.at(p, self.to, fo["pt"])
        np.add.at(q, self.fo, fo["qf"])
        np.add.at(q, self.to, fo["qt"])
        p += self.gs * vm * vm
        q -= self.bs * vm * vm
        return p, q, fo

    def objective(self, x: np.ndarray) -> float:
        pg = x[self.off_pg:self.off_pg + self.ng]
        return float(np.sum((self.cost_a * pg + self.cost_b) * pg
                            + self.cost_c))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        g = np.zeros(self.n)
        pg = x[self.off_pg:self.off_pg + self.ng]
        g[self.off_pg:self.off_pg + self.ng] = 2 * self.cost_a * pg + self.cost_b
        return g

    def constraints(self, x: np.ndarray) -> np.ndarray:
        va, vm, pgv, qgv = self.split(x)
        p, q, fo = self.injections(va, vm)
        cp = -(self.pd + p)
        cq = -(self.qd + q)
        np.add.at(cp, self.gslot, pgv)
        np.add.at(cq, self.gslot, qgv)
        out = np.empty(self.m_ineq)
        r = self.rated
        out[0::2] = fo["pf"][r] ** 2 + fo["qf"][r] ** 2
        out[1::2] = fo["pt"][r] ** 2 + fo["qt"][r] ** 2
        return np.concatenate([cp, cq, out])

    def jacobian(self, x: np.ndarray) -> sp.csr_matrix:
        va, vm, _, _ = self.split(x)
        fo = self.first_order(va, vm)
        parts = [np.stack(fo[k], axis=1).ravel()
                 for k in ("gpf", "gpt", "gqf", "gqt")]
        data = [-np.concatenate(parts)]                      # balance rows
        data.append(-2 * self.gs * vm)                       # shunts
        data.append(2 * self.bs * vm)
        data.append(np.ones(self.ng))                        # gen columns
        data.append(np.ones(self.ng))
        if self.nr:
            r = self.rated
            dsf = sum(2 * fo[vk][r, None] * np.stack(fo[gk], axis=1)[r]
                      for vk, gk in (("pf", "gpf"), ("qf", "gqf")))
            dst = sum(2 * fo[vk][r, None] * np.stack(fo[gk], axis=1)[r]
                      for vk, gk in (("pt", "gpt"), ("qt", "gqt")))
            data.append(dsf.ravel())
            data.append(dst.ravel())
        mat = sp.coo_matrix(
            (np.concatenate(data), (self.jac_rows, self.jac_cols)),
            shape=(self.m_eq + self.m_ineq, self.n))
        return mat.tocsr()

    def _flow_hessians(self, fo):
        """Per-position second derivatives of the four flow quantities."""
        u, w, u2, w2 = fo["u"], fo["w"], fo["u2"], fo["w2"]
        vf, vt, vv = fo["vf"], fo["vt"], fo["vv"]
        zero = np.zeros(self.nbr)
        g2ff, b2ff = 2 * self.gff, 2 * self.bff
        g2tt, b2tt = 2 * self.gtt, 2 * self.btt
        # rows follow _POSITIONS
        hpf = (-vv * u, vv * u, -vt * w, -vf * w, -vv * u, vt * w, vf * w,
               g2ff, u, zero)
        hqf = (-vv * w, vv * w, vt * u, vf * u, -vv * w, -vt * u, -vf * u,
               -b2ff, w, zero)
        hpt = (-vv * u2, vv * u2, vt * w2, vf * w2, -vv * u2, -vt * w2,
               -vf * w2, zero, u2, g2tt)
        hqt = (-vv * w2, vv * w2, -vt * u2, -vf * u2, -vv * w2, vt * u2,
               vf * u2, zero, w2, -b2tt)
        return hpf, hqf, hpt, hqt

    def lagrangian_hessian(self, x: np.ndarray, obj_factor: float,
                           mult: np.ndarray) -> sp.csr_matrix:
        va, vm, _, _ = self.split(x)
        fo = self.first_order(va, vm)
        hpf, hqf, hpt, hqt = self._flow_hessians(fo)

        prow_f, prow_t, qrow_f, qrow_t = self.flow_rows
        lam_pf = -mult[prow_f]
        lam_pt = -mult[prow_t]
        lam_qf = -mult[qrow_f]
        lam_qt = -mult[qrow_t]
        sf = np.zeros(self.nbr)
        st = np.zeros(self.nbr)
        if self.nr:
            sf[self.rated] = mult[self.m_eq + 2 * np.arange(self.nr)]
            st[self.rated] = mult[self.m_eq + 2 * np.arange(self.nr) + 1]

        c_pf = lam_pf + 2 * sf * fo["pf"]
        c_qf = lam_qf + 2 * sf * fo["qf"]
        c_pt = lam_pt + 2 * st * fo["pt"]
        c_qt = lam_qt + 2 * st * fo["qt"]

        gpf, gqf = fo["gpf"], fo["gqf"]
        gpt, gqt = fo["gpt"], fo["gqt"]
        vals = []
        for i, (a, b) in enumerate(_POSITIONS):
            v = (c_pf * hpf[i] + c_qf * hqf[i]
                 + c_pt * hpt[i] + c_qt * hqt[i]
                 + 2 * sf * (gpf[a] * gpf[b] + gqf[a] * gqf[b])
                 + 2 * st * (gpt[a] * gpt[b] + gqt[a] * gqt[b]))
            vals.append(v)
            if a != b:
                vals.append(v)
        lam_p_bus = -mult[:self.nb]
        lam_q_bus = -mult[self.nb:2 * self.nb]
        vals.append(2 * (lam_p_bus * self.gs - lam_q_bus * self.bs))
        pgd = np.full(self.ng, 0.0)
        pgd += 2 * obj_factor * self.cost_a
        vals.append(pgd)
        mat = sp.coo_matrix(
            (np.concatenate(vals), (self.hess_rows, self.hess_cols)),
            shape=(self.n, self.n))
        return mat.tocsr()


def _make_layout(e: _Engine) -> AcopfLayout:
    nb = e.nb
    va = {pos: e.slot[pos] for pos in e.active}
    vm = {pos: e.slot[pos] + nb for pos in e.active}
    pg = {gpos: e.off_pg + j for j, gpos in enumerate(e.live_gens)}
    qg = {gpos: e.off_qg + j for j, gpos in enumerate(e.live_gens)}
    p_row = {pos: e.slot[pos] for pos in e.active}
    q_row = {pos: e.slot[pos] + nb for pos in e.active}
    sf_row = {e.live_branches[i]: 2 * k for k, i in enumerate(e.rated)}
    st_row = {e.live_branches[i]: 2 * k + 1 for k, i in enumerate(e.rated)}
    return AcopfLayout(n_vars=e.n, n_eq=e.m_eq, n_ineq=e.m_ineq, va=va,
                       vm=vm, pg=pg, qg=qg, p_row=p_row, q_row=q_row,
                       sf_row=sf_row, st_row=st_row,
                       ref_buses=e.ref_positions)


def build_acopf(case: NetworkCase):
    """Build the stage NLP.  Returns (NlpProblem, AcopfLayout).

    Raises Disconnected when the in-service network is not a single
    connected component (NoReferenceBus is already enforced on parse).
    """
    n_islands, _ = check_connectivity(case)
    if n_islands != 1:
        raise Disconnected(f"case {case.name!r} has {n_islands} islands")
    e = _Engine(case)
    layout = _make_layout(e)
    gl = np.full(e.m_ineq, -np.inf)
    gu = np.repeat(e.smax2, 2) if e.nr else np.zeros(0)
    problem = NlpProblem(
        n=e.n, m_eq=e.m_eq, m_ineq=e.m_ineq, xl=e.xl.copy(), xu=e.xu.copy(),
        gl=gl, gu=gu, x0=e.x0.copy(), objective=e.objective,
        gradient=e.gradient, constraints=e.constraints, jacobian=e.jacobian,
        lagrangian_hessian=e.lagrangian_hessian, name=f"acopf:{case.name}")
    return problem, layout


@dataclass(frozen=True)
class SolvedCase:
    """A case together with an operating point and its line flows.

    Arrays align with case.buses / case.gens / case.branches; entries
    of out-of-service elements are zero (dispatch, flows).  Powers are
    MW / MVAr, angles radians, objective $/h.
    """

    case: NetworkCase
    vm: np.ndarray
    va: np.ndarray
    pg: np.ndarray
    qg: np.ndarray
    pf: np.ndarray
    qf: np.ndarray
    pt: np.ndarray
    qt: np.ndarray
    objective: float

    def to_raw(self, name: str | None = None) -> matpower.RawCase:
        """RawCase with solved voltages, dispatch and flow columns."""
        base = self.case.to_raw()
        bus = tuple(row[:7] + (self.vm[i], math.degrees(self.va[i]))
                    + row[9:]
                    for i, row in enumerate(base.bus))
        gen = tuple((row[0], self.pg[i], self.qg[i]) + row[3:]
                    for i, row in enumerate(base.gen))
        branch = tuple(row[:13] + (self.pf[i], self.qf[i],
                                   self.pt[i], self.qt[i])
                       for i, row in enumerate(base.branch))
        return matpower.RawCase(name=name or base.name,
                                base_mva=base.base_mva, bus=bus, gen=gen,
                                branch=branch, gencost=base.gencost)


def _branch_flows_mw(e: _Engine, va: np.ndarray, vm: np.ndarray):
    nbrs = len(e.case.branches)
    pf = np.zeros(nbrs)
    qf = np.zeros(nbrs)
    pt = np.zeros(nbrs)
    qt = np.zeros(nbrs)
    if e.nbr:
        va_s = np.array([va[pos] for pos in e.active])
        vm_s = np.array([vm[pos] for pos in e.active])
        fo = e.first_order(va_s, vm_s)
        live = np.array(e.live_branches, dtype=np.intp)
        pf[live] = fo["pf"] * e.base
        qf[live] = fo["qf"] * e.base
        pt[live] = fo["pt"] * e.base
        qt[live] = fo["qt"] * e.base
    return pf, qf, pt, qt


def extract_solution(case: NetworkCase, layout: AcopfLayout,
                     x: np.ndarray) -> SolvedCase:
    """Unpack an NLP point into a SolvedCase with computed line flows."""
    if x.shape != (layout.n_vars,):
        raise DimensionMismatch(
            f"x has shape {x.shape}, layout expects ({layout.n_vars},)")
    e = _Engine(case)
    nb_all, ng_all = len(case.buses), len(case.gens)
    vm = np.zeros(nb_all)
    va = np.zeros(nb_all)
    for pos in layout.va:
        va[pos] = x[layout.va[pos]]
        vm[pos] = x[layout.vm[pos]]
    pg = np.zeros(ng_all)
    qg = np.zeros(ng_all)
    for gpos, idx in layout.pg.items():
        pg[gpos] = x[idx] * case.base_mva
        qg[gpos] = x[layout.qg[gpos]] * case.base_mva
    pfl, qfl, ptl, qtl = _branch_flows_mw(e, va, vm)
    obj = float(sum(case.gens[gpos].cost.at(pg[gpos]) for gpos in layout.pg))
    return SolvedCase(case=case, vm=vm, va=va, pg=pg, qg=qg, pf=pfl, qf=qfl,
                      pt=ptl, qt=qtl, objective=obj)


def pack_solution(case: NetworkCase, layout: AcopfLayout,
                  sol: SolvedCase) -> np.ndarray:
    """Inverse of extract_solution (flows ignored)."""
    x = np.zeros(layout.n_vars)
    for pos, idx in layout.va.items():
        x[idx] = sol.va[pos]
        x[layout.vm[pos]] = sol.vm[pos]
    for gpos, idx in layout.pg.items():
        x[idx] = sol.pg[gpos] / case.base_mva
        x[layout.qg[gpos]] = sol.qg[gpos] / case.base_mva
    return x


def solution_from_case(case: NetworkCase) -> SolvedCase:
    """Treat the case's stored voltages and dispatch as a solution."""
    e = _Engine(case)
    vm = np.array([b.vm for b in case.buses])
    va = np.array([b.va for b in case.buses])
    pg = np.array([g.pg if g.status else 0.0 for g in case.gens])
    qg = np.array([g.qg if g.status else 0.0 for g in case.gens])
    pfl, qfl, ptl, qtl = _branch_flows_mw(e, va, vm)
    obj = float(sum(g.cost.at(pg[j]) for j, g in enumerate(case.gens)
                    if g.status))
    return SolvedCase(case=case, vm=vm, va=va, pg=pg, qg=qg, pf=pfl, qf=qfl,
                      pt=ptl, qt=qtl, objective=obj)


def residuals_at(case: NetworkCase, sol: SolvedCase):
    """Per-bus power balance residuals (delta P MW, delta Q MVAr).

    delta = generation - load - network injection, evaluated at the
    solution's voltages and dispatch.  Isolated buses report zero.
    """
    for attr, count in (("vm", len(case.buses)), ("pg", len(case.gens))):
        if getattr(sol, attr).shape != (count,):
            raise DimensionMismatch(f"solution {attr} has wrong length")
    e = _Engine(case)
    va_s = np.array([sol.va[pos] for pos in e.active])
    vm_s = np.array([sol.vm[pos] for pos in e.active])
    p, q, _ = e.injections(va_s, vm_s)
    dp_s = -p * e.base
    dq_s = -q * e.base
    for k, pos in enumerate(e.active):
        b = case.buses[pos]
        dp_s[k] -= b.pd
        dq_s[k] -= b.qd
    for j in e.live_gens:
        k = e.slot[case.bus_pos[case.gens[j].bus]]
        dp_s[k] += sol.pg[j]
        dq_s[k] += sol.qg[j]
    dp = np.zeros(len(case.buses))
    dq = np.zeros(len(case.buses))
    for k, pos in enumerate(e.active):
        dp[pos] = dp_s[k]
        dq[pos] = dq_s[k]
    return dp, dq
