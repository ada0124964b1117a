"""Discrete Q-modulus of curve families on flow graphs.

The family joining node sets E and F consists of all graph paths from E to
F.  The modulus program

    minimize   sum_i mu_i rho_i^Q
    subject to sum over edges of path p of (rho_i + rho_j)/2 * len >= 1
               rho >= 0

is bracketed from both sides.  The engine is the Lagrangian dual over unit
E-F flows: for any conserved unit flow with node loads sigma_i the value

    T = sum_i mu_i^(1-Q') sigma_i^Q',   Q' = Q/(Q-1)

certifies the lower bound M_Q >= T^-(Q-1), and the matched primal density
rho_i proportional to (sigma_i/mu_i)^(1/(Q-1)), rescaled to make its
rho-shortest E-F path integral exactly one, certifies an upper bound.  The
flow is optimized by majorize-minimize reweighting with one weighted
graph-Laplacian solve per round.  A constraint-generation stage over an
active path set (restricted dual solved in closed form per node) polishes
the bracket when the flow stage stalls.  Every returned bracket is valid
regardless of how early the iteration stops.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.sparse.csgraph import dijkstra as _dijkstra
from scipy.sparse.linalg import spsolve

try:
    import pyamg

    _HAVE_PYAMG = True
except ImportError:  # pragma: no cover
    _HAVE_PYAMG = False

from .geodesics import (FlowGraph, build_flow_graph, graph_distance,
                        graph_polyline, subgraph)
from .spaces import SpaceModel, as_point, get_space


@dataclass
class Density:
    """Nonnegative node density, the optimization variable of the modulus."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("density must be finite and nonnegative")
        self.values = v


@dataclass
class CurveFamily:
    """Flow graph with two disjoint connected node sets E and F."""

    graph: FlowGraph
    E: np.ndarray
    F: np.ndarray

    def __post_init__(self):
        self.E = np.unique(np.asarray(self.E, dtype=np.int64))
        self.F = np.unique(np.asarray(self.F, dtype=np.int64))
        if self.E.size == 0 or self.F.size == 0:
            raise ValueError("E and F must be nonempty")
        if np.intersect1d(self.E, self.F).size:
            raise ValueError("E and F must be disjoint")
        for name, ids in (("E", self.E), ("F", self.F)):
            if not _induced_connected(self.graph, ids):
                raise ValueError(f"{name} is not connected in the graph")


@dataclass
class ModulusResult:
    upper: float
    lower: float
    density: Density
    active_paths: int
    iterations: int
    converged: bool
    gap: float

    def to_dict(self) -> dict:
        return {
            "upper": float(self.upper),
            "lower": float(self.lower),
            "gap": float(self.gap),
            "active_paths": int(self.active_paths),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
        }


@dataclass
class LoewnerSample:
    t: float
    separation: float
    min_diam: float
    modulus: ModulusResult

    def __post_init__(self):
        if self.min_diam > 0 and self.separation / self.min_diam > self.t * (1.0 + 0.15):
            raise ValueError("separation / min_diam exceeds requested t")


def _induced_connected(g: FlowGraph, ids: np.ndarray) -> bool:
    if ids.size == 1:
        return True
    mark = np.zeros(g.n_nodes, dtype=bool)
    mark[ids] = True
    csr = g.csr()
    seen = {int(ids[0])}
    stack = [int(ids[0])]
    while stack:
        v = stack.pop()
        lo, hi = csr.indptr[v], csr.indptr[v + 1]
        for w in csr.indices[lo:hi]:
            w = int(w)
            if mark[w] and w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == ids.size


# --------------------------------------------------------------------------
# primitives
# --------------------------------------------------------------------------

def path_integral(g: FlowGraph, rho, path) -> float:
    """Trapezoid line integral of the node density along a graph path."""
    rho = rho.values if isinstance(rho, Density) else np.asarray(rho, dtype=float)
    path = np.asarray(path, dtype=int)
    if path.size <= 1:
        return 0.0
    table = g.edge_length_lookup()
    total = 0.0
    for a, b in zip(path[:-1], path[1:]):
        key = (int(a), int(b))
        if key not in table:
            raise ValueError(f"nodes {a} and {b} are not adjacent")
        total += 0.5 * (rho[a] + rho[b]) * table[key]
    return float(total)


def energy(g: FlowGraph, rho, Q: float) -> float:
    """Q-energy sum_i measure_i * rho_i^Q."""
    if Q < 1:
        raise ValueError("Q must be >= 1")
    rho = rho.values if isinstance(rho, Density) else np.asarray(rho, dtype=float)
    return float(np.sum(g.node_measure * rho ** Q))


def _rho_edge_weights(g: FlowGraph, rho: np.ndarray) -> np.ndarray:
    return 0.5 * (rho[g.edge_i] + rho[g.edge_j]) * g.edge_len


def _virtual_source_csr(g: FlowGraph, weights: np.ndarray, sources: np.ndarray) -> csr_matrix:
    n = g.n_nodes
    i = np.concatenate([g.edge_i, g.edge_j, np.full(sources.size, n, dtype=np.int64)])
    j = np.concatenate([g.edge_j, g.edge_i, sources])
    w = np.concatenate([weights, weights, np.zeros(sources.size)])
    return csr_matrix((w, (i, j)), shape=(n + 1, n + 1))


def _shortest_tree(fam: CurveFamily, weights: np.ndarray):
    """Dijkstra tree from a virtual source wired to all of E at zero cost."""
    mat = _virtual_source_csr(fam.graph, weights, fam.E)
    dist, pred = _dijkstra(mat, directed=True, indices=fam.graph.n_nodes,
                           return_predecessors=True)
    return dist, pred


def _tree_path(pred: np.ndarray, target: int, virtual: int) -> np.ndarray:
    path = [int(target)]
    while pred[path[-1]] >= 0 and pred[path[-1]] != virtual:
        path.append(int(pred[path[-1]]))
    path.reverse()
    return np.asarray(path, dtype=int)


def rho_shortest_path(fam: CurveFamily, rho) -> tuple[float, np.ndarray | None]:
    """Exact minimum of the path integral over all E-F paths.

    Dijkstra from a virtual source wired to E with zero-weight edges.
    Returns (min integral, node path); (inf, None) if E and F are in
    different components.
    """
    g = fam.graph
    rho = rho.values if isinstance(rho, Density) else np.asarray(rho, dtype=float)
    w = _rho_edge_weights(g, rho)
    dist, pred = _shortest_tree(fam, w)
    vals = dist[fam.F]
    if not np.any(np.isfinite(vals)):
        return math.inf, None
    best = fam.F[int(np.argmin(vals))]
    return float(dist[best]), _tree_path(pred, int(best), g.n_nodes)


def graph_path_length(g: FlowGraph, path) -> float:
    table = g.edge_length_lookup()
    return float(sum(table[(int(a), int(b))] for a, b in zip(path[:-1], path[1:])))


def admissibility_check(fam: CurveFamily, rho, samples: int = 32, seed: int = 0):
    """Minimum path integral over the E-F family, with a witness path.

    The rho-shortest path gives the exact discrete minimum; randomized
    perturbed paths are evaluated as consistency probes.
    """
    rho_v = rho.values if isinstance(rho, Density) else np.asarray(rho, dtype=float)
    best, witness = rho_shortest_path(fam, rho_v)
    if witness is None:
        return math.inf, None
    rng = np.random.default_rng(seed)
    g = fam.graph
    base_w = _rho_edge_weights(g, rho_v)
    for _ in range(samples):
        jitter = np.exp(rng.normal(scale=0.25, size=base_w.shape))
        w = (base_w + 1e-12 * g.edge_len) * jitter
        e = np.array([rng.choice(fam.E)])
        mat = _virtual_source_csr(g, w, e)
        dist, pred = _dijkstra(mat, directed=True, indices=g.n_nodes, return_predecessors=True)
        vals = dist[fam.F]
        if not np.any(np.isfinite(vals)):
            continue
        tgt = fam.F[int(np.argmin(vals))]
        path = [int(tgt)]
        while pred[path[-1]] >= 0 and pred[path[-1]] != g.n_nodes:
            path.append(int(pred[path[-1]]))
        path.reverse()
        val = path_integral(g, rho_v, path)
        if val < best:
            best, witness = val, np.asarray(path, dtype=int)
    return float(best), witness


# --------------------------------------------------------------------------
# the modulus solver
# --------------------------------------------------------------------------

def _path_row(g: FlowGraph, table: dict, path: np.ndarray):
    """Sparse constraint row: per-node trapezoid weights along the path."""
    idx = {}
    for a, b in zip(path[:-1], path[1:]):
        ell = table[(int(a), int(b))]
        idx[int(a)] = idx.get(int(a), 0.0) + 0.5 * ell
        idx[int(b)] = idx.get(int(b), 0.0) + 0.5 * ell
    cols = np.fromiter(idx.keys(), dtype=np.int64)
    vals = np.fromiter(idx.values(), dtype=float)
    return cols, vals


class _ActiveSet:
    def __init__(self, n_nodes: int):
        self.n = n_nodes
        self.rows = []
        self.keys = set()

    def add(self, g, table, path) -> bool:
        key = tuple(int(x) for x in path)
        if key in self.keys:
            return False
        self.keys.add(key)
        self.rows.append(_path_row(g, table, path))
        return True

    def matrix(self) -> csr_matrix:
        indptr = [0]
        indices = []
        data = []
        for cols, vals in self.rows:
            indices.append(cols)
            data.append(vals)
            indptr.append(indptr[-1] + cols.size)
        return csr_matrix(
            (np.concatenate(data), np.concatenate(indices), np.array(indptr)),
            shape=(len(self.rows), self.n),
        )


def _dual_value_and_rho(A: csr_matrix, lam: np.ndarray, mu: np.ndarray, Q: float):
    """g(lambda) and the closed-form primal minimizer rho*(lambda)."""
    s = A.T @ lam
    rho = (s / (Q * mu)) ** (1.0 / (Q - 1.0))
    val = float(lam.sum() - (Q - 1.0) / Q * np.dot(s, rho))
    return val, rho


def _solve_dual_pgd(A, mu, Q, lam0, iterations):
    """Projected gradient ascent with step c/sqrt(k) and iterate averaging."""
    lam = lam0.copy()
    best_val, best_rho = _dual_value_and_rho(A, lam, mu, Q)
    grad0 = 1.0 - A @ best_rho
    scale = max(np.max(np.abs(lam)), 1.0)
    c = scale / max(np.linalg.norm(grad0), 1e-12)
    lam_avg = np.zeros_like(lam)
    half = max(iterations // 2, 1)
    for k in range(1, iterations + 1):
        val, rho = _dual_value_and_rho(A, lam, mu, Q)
        if val > best_val:
            best_val, best_rho = val, rho
        grad = 1.0 - A @ rho
        lam = np.maximum(0.0, lam + (c / math.sqrt(k)) * grad)
        if k > iterations - half:
            lam_avg += lam / half
    val_avg, rho_avg = _dual_value_and_rho(A, lam_avg, mu, Q)
    if val_avg > best_val:
        best_val, best_rho = val_avg, rho_avg
    return best_val, best_rho, lam_avg


def _solve_dual_lbfgs(A, mu, Q, lam0, iterations):
    """Box-constrained quasi-Newton ascent on the smooth concave dual."""

    def f(lam):
        val, rho = _dual_value_and_rho(A, lam, mu, Q)
        grad = 1.0 - A @ rho
        return -val, -grad

    out = minimize(f, lam0, jac=True, method="L-BFGS-B",
                   bounds=[(0.0, None)] * lam0.size,
                   options={"maxiter": iterations, "ftol": 1e-14, "gtol": 1e-12})
    lam = np.maximum(out.x, 0.0)
    val, rho = _dual_value_and_rho(A, lam, mu, Q)
    return val, rho, lam


class _FlowProblem:
    """Unit E-F flow machinery: E and F collapse to supernodes, conservation
    holds at every interior node, node loads are measured on the original
    nodes."""

    def __init__(self, fam: CurveFamily):
        g = fam.graph
        n = g.n_nodes
        inE = np.zeros(n, bool)
        inE[fam.E] = True
        inF = np.zeros(n, bool)
        inF[fam.F] = True
        node_map = -np.ones(n, np.int64)
        interior = np.nonzero(~inE & ~inF)[0]
        node_map[interior] = np.arange(interior.size)
        self.SE = interior.size
        self.SF = interior.size + 1
        nred = interior.size + 2
        node_map[fam.E] = self.SE
        node_map[fam.F] = self.SF
        mi = node_map[g.edge_i]
        mj = node_map[g.edge_j]
        keep = mi != mj
        self.eidx = np.nonzero(keep)[0]
        me = self.eidx.size
        self.B = sp.csr_matrix(
            (
                np.concatenate([np.ones(me), -np.ones(me)]),
                (np.concatenate([mi[keep], mj[keep]]),
                 np.concatenate([np.arange(me), np.arange(me)])),
            ),
            shape=(nred, me),
        )
        b = np.zeros(nred)
        b[self.SE] = 1.0
        b[self.SF] = -1.0
        self.mask = np.ones(nred, bool)
        self.mask[self.SF] = False
        self.bm = b[self.mask]
        self.nred = nred
        self.g = g
        self.c_half = 0.5 * g.edge_len
        self._x0 = None

    def solve(self, r: np.ndarray) -> np.ndarray:
        """Weighted electrical flow: minimize sum r_e f_e^2 s.t. conservation."""
        Rinv = sp.diags(1.0 / r)
        L = (self.B @ Rinv @ self.B.T).tocsr()
        Lg = L[self.mask][:, self.mask].tocsr()
        if _HAVE_PYAMG and Lg.shape[0] > 500:
            ml = pyamg.smoothed_aggregation_solver(Lg, max_coarse=200)
            pm = ml.solve(self.bm, x0=self._x0, tol=1e-10, accel="cg")
        else:
            pm = spsolve(Lg.tocsc(), self.bm)
        self._x0 = pm
        p = np.zeros(self.nred)
        p[self.mask] = pm
        return Rinv @ (self.B.T @ p)

    def node_load(self, f: np.ndarray) -> np.ndarray:
        af = np.zeros(self.g.edge_len.size)
        af[self.eidx] = np.abs(f)
        sig = np.zeros(self.g.n_nodes)
        np.add.at(sig, self.g.edge_i, self.c_half * af)
        np.add.at(sig, self.g.edge_j, self.c_half * af)
        return sig


def _restrict_to_component(fam: CurveFamily):
    """Drop nodes outside the component carrying the family (keeps the
    Laplacian nonsingular); returns (family, kept ids) or None if E and F
    are disconnected."""
    g = fam.graph
    ncomp, labels = connected_components(g.csr(), directed=False)
    lab = labels[fam.E[0]]
    if np.any(labels[fam.E] != lab) or np.any(labels[fam.F] != lab):
        # family sets must each be connected, so a mismatch means E-F split
        return None
    if ncomp == 1:
        return fam, None
    keep = np.nonzero(labels == lab)[0]
    remap = -np.ones(g.n_nodes, np.int64)
    remap[keep] = np.arange(keep.size)
    sub = subgraph(g, keep)
    return CurveFamily(sub, remap[fam.E], remap[fam.F]), keep


def q_modulus(fam: CurveFamily, Q: float, tol: float = 0.02, *,
              gap_target: float = 0.10, outer_cap: int = 60,
              inner_iterations: int = 2000, inner: str = "lbfgs",
              cg_rounds: int = 8, paths_per_round: int = 64,
              check_every: int = 3, lower_floor: float = 0.0,
              seed: int = 0) -> ModulusResult:
    """Certified bracket [lower, upper] around the discrete Q-modulus.

    Flow-dual rounds (one Laplacian solve each) drive the bracket; every
    round certifies a lower bound T^-(Q-1) and, after rescaling the matched
    density to exact admissibility, an upper bound.  If the gap target is
    not met within ``outer_cap`` rounds, a constraint-generation stage over
    rho-shortest paths polishes the restricted dual.  ``lower_floor`` lets
    callers thread a lower bound that is already known to be valid (a unit
    flow for a family stays feasible for any enclosing family, so nested
    sweeps can pass the previous bound).  Deterministic; ``seed`` is kept
    for interface parity.
    """
    if not (Q > 1):
        raise ValueError("Q must be > 1")
    if not (0 < tol < 0.5):
        raise ValueError("tol must be in (0, 0.5)")

    restricted = _restrict_to_component(fam)
    if restricted is None:
        return ModulusResult(0.0, 0.0, Density(np.zeros(fam.graph.n_nodes)), 0, 0, True, 0.0)
    sub_fam, kept = restricted
    g = sub_fam.graph
    mu = np.maximum(g.node_measure, 1e-300)
    Qp = Q / (Q - 1.0)
    w_node = mu ** (1.0 - Qp)

    flow = _FlowProblem(sub_fam)
    best_lower = max(0.0, float(lower_floor))
    best_upper = math.inf
    best_rho = np.zeros(g.n_nodes)
    iterations = 0

    r = np.ones(flow.eidx.size)
    f = flow.solve(r)
    for it in range(1, outer_cap + 1):
        iterations = it
        sig = flow.node_load(f)
        T = float(np.sum(w_node * sig ** Qp))
        if T > 0:
            best_lower = max(best_lower, T ** (-(Q - 1.0)))
            if it % check_every == 0 or it == outer_cap:
                rho0 = (sig / mu) ** (1.0 / (Q - 1.0)) / T
                cmin, _ = rho_shortest_path(sub_fam, rho0)
                if cmin > 0 and math.isfinite(cmin):
                    up = energy(g, rho0, Q) / cmin ** Q
                    if up < best_upper:
                        best_upper = up
                        best_rho = rho0 / cmin
                gap = (best_upper - best_lower) / best_upper if best_upper > 0 else 0.0
                if gap <= 0.9 * gap_target and it >= 6:
                    break
        # majorize-minimize reweighting of the flow quadratic
        contrib = w_node * np.maximum(sig, 1e-300) ** (Qp - 1.0)
        r_full = flow.c_half * (contrib[g.edge_i] + contrib[g.edge_j])
        af = np.abs(f)
        floor = max(float(af.max()), 1e-30) * 1e-8
        r = r_full[flow.eidx] / np.maximum(af, floor)
        rmax = float(r.max()) if r.size else 1.0
        r = np.clip(r, rmax * 1e-14, None)
        f = flow.solve(r)

    gap = (best_upper - best_lower) / best_upper if best_upper > 0 else 1.0
    if gap > gap_target and cg_rounds > 0:
        cg = _constraint_generation(sub_fam, Q, tol, mu,
                                    rounds=cg_rounds,
                                    inner_iterations=inner_iterations,
                                    inner=inner,
                                    paths_per_round=paths_per_round)
        iterations += cg[3]
        best_lower = max(best_lower, cg[0])
        if cg[1] < best_upper:
            best_upper = cg[1]
            best_rho = cg[2]

    if not math.isfinite(best_upper):
        best_upper = 0.0
    best_lower = min(best_lower, best_upper)
    gap = (best_upper - best_lower) / best_upper if best_upper > 0 else 0.0

    if kept is not None:
        full_rho = np.zeros(fam.graph.n_nodes)
        full_rho[kept] = best_rho
        best_rho = full_rho
    return ModulusResult(
        upper=float(best_upper),
        lower=float(max(best_lower, 0.0)),
        density=Density(best_rho),
        active_paths=0,
        iterations=iterations,
        converged=gap <= gap_target,
        gap=float(gap),
    )


def _constraint_generation(fam: CurveFamily, Q, tol, mu, *, rounds,
                           inner_iterations, inner, paths_per_round):
    """Active-set stage: harvest violated rho-shortest tree paths, solve the
    restricted dual in multiplier space.  Returns (lower, upper, density,
    iterations)."""
    g = fam.graph
    table = g.edge_length_lookup()
    virtual = g.n_nodes
    active = _ActiveSet(g.n_nodes)

    def harvest(dist, pred, thresh):
        vals = dist[fam.F]
        order = np.argsort(vals, kind="stable")
        violated = [fam.F[i] for i in order if np.isfinite(vals[i]) and vals[i] < thresh]
        if not violated:
            return 0
        stride = max(1, len(violated) // paths_per_round)
        added = 0
        for idx in range(0, len(violated), stride):
            if active.add(g, table, _tree_path(pred, int(violated[idx]), virtual)):
                added += 1
        return added

    dist0, pred0 = _shortest_tree(fam, _rho_edge_weights(g, np.ones(g.n_nodes)))
    if not np.any(np.isfinite(dist0[fam.F])):
        return 0.0, 0.0, np.zeros(g.n_nodes), 0
    harvest(dist0, pred0, math.inf)
    lam = np.zeros(len(active.rows))

    solver = _solve_dual_lbfgs if inner == "lbfgs" else _solve_dual_pgd
    best_lower, best_upper = 0.0, math.inf
    best_rho = np.zeros(g.n_nodes)
    it = 0
    for it in range(1, rounds + 1):
        A = active.matrix()
        val, rho, lam = solver(A, mu, Q, lam, inner_iterations)
        best_lower = max(best_lower, val)
        dist, pred = _shortest_tree(fam, _rho_edge_weights(g, rho))
        cmin = float(np.min(dist[fam.F]))
        if cmin > 0 and math.isfinite(cmin):
            up = energy(g, rho, Q) / cmin ** Q
            if up < best_upper:
                best_upper = up
                best_rho = rho / cmin
        if cmin >= 1.0 - tol:
            break
        added = harvest(dist, pred, max(1.0 - 0.5 * tol, cmin * (1 + 1e-12)))
        lam = np.concatenate([lam, np.zeros(len(active.rows) - lam.size)])
        if added == 0:
            break
    return best_lower, best_upper, best_rho, it


def brute_force_modulus(fam: CurveFamily, Q: float, path_cap: int = 200_000) -> float:
    """Oracle: enumerate all simple E-F paths and minimize the energy directly.

    Independent of the constraint-generation solver; only usable on small
    graphs.
    """
    g = fam.graph
    csr = g.csr()
    table = g.edge_length_lookup()
    inF = np.zeros(g.n_nodes, dtype=bool)
    inF[fam.F] = True
    paths = []

    def dfs(node, visited, path):
        if len(paths) >= path_cap:
            raise ResourceWarning("path cap exceeded")
        if inF[node]:
            paths.append(list(path))
            return
        lo, hi = csr.indptr[node], csr.indptr[node + 1]
        for w in csr.indices[lo:hi]:
            w = int(w)
            if w not in visited:
                visited.add(w)
                path.append(w)
                dfs(w, visited, path)
                path.pop()
                visited.remove(w)

    for e in fam.E:
        dfs(int(e), {int(e)}, [int(e)])
    if not paths:
        return 0.0

    rows = [_path_row(g, table, np.asarray(p, dtype=int)) for p in paths]
    indptr = [0]
    indices = []
    data = []
    for cols, vals in rows:
        indices.append(cols)
        data.append(vals)
        indptr.append(indptr[-1] + cols.size)
    A = csr_matrix((np.concatenate(data), np.concatenate(indices), np.array(indptr)),
                   shape=(len(rows), g.n_nodes))
    mu = np.maximum(g.node_measure, 1e-300)
    Ad = A.toarray()

    def obj(rho):
        val = np.sum(mu * rho ** Q)
        grad = Q * mu * rho ** (Q - 1.0)
        return val, grad

    x0 = np.full(g.n_nodes, 1.0)
    c0, _ = rho_shortest_path(fam, x0)
    x0 /= max(c0, 1e-9)
    cons = [{"type": "ineq", "fun": lambda r: Ad @ r - 1.0, "jac": lambda r: Ad}]
    out = minimize(obj, x0, jac=True, method="SLSQP", bounds=[(0.0, None)] * g.n_nodes,
                   constraints=cons, options={"maxiter": 500, "ftol": 1e-12})
    if not out.success:
        out = minimize(obj, x0, jac=True, method="SLSQP", bounds=[(0.0, None)] * g.n_nodes,
                       constraints=cons, options={"maxiter": 2000, "ftol": 1e-10})
    return float(out.fun)


# --------------------------------------------------------------------------
# constructions
# --------------------------------------------------------------------------

def annulus_family(h: float, r_in: float = 1.0, r_out: float = 2.0,
                   stencil_level: int = 4) -> CurveFamily:
    """Planar annulus with boundary rings as E and F.

    Single-layer Euclidean grid; node measures are cell areas, so the
    2-modulus of the ring family approximates 2*pi / log(r_out / r_in).
    """
    space = get_space("euclidean3")
    pad = 1.5 * h
    lim = r_out + pad
    g = build_flow_graph(
        space, [0.0, 0.0, 0.0], r_out + pad, h,
        bounds=(np.array([-lim, -lim, 0.0]), np.array([lim, lim, 0.0])),
        spacing=np.array([h, h, 1.0]),
        stencil_level=stencil_level,
    )
    rr = np.hypot(g.nodes[:, 0], g.nodes[:, 1])
    keep = np.nonzero((rr >= r_in - 1.01 * h) & (rr <= r_out + 1.01 * h))[0]
    sub = subgraph(g, keep)
    rr = np.hypot(sub.nodes[:, 0], sub.nodes[:, 1])
    band = 0.51 * h
    for _ in range(4):
        E = np.nonzero(np.abs(rr - r_in) <= band)[0]
        F = np.nonzero(np.abs(rr - r_out) <= band)[0]
        try:
            return CurveFamily(sub, E, F)
        except ValueError:
            band *= 1.3
    return CurveFamily(sub, E, F)


def annulus_extremal_density(fam: CurveFamily, r_in: float = 1.0, r_out: float = 2.0) -> Density:
    """Classical extremal density 1 / (|x| log(r_out/r_in)) on the nodes."""
    rr = np.hypot(fam.graph.nodes[:, 0], fam.graph.nodes[:, 1])
    return Density(1.0 / (np.maximum(rr, 1e-9) * math.log(r_out / r_in)))


def _segment_nodes(space: SpaceModel, g: FlowGraph, base, length: float, ds: float):
    steps = np.arange(0.0, length + 0.5 * ds, ds)
    u = np.zeros(space.frame_dim)
    u[0] = 1.0
    pts = np.array([space.constant_flow(as_point(base), u, s) for s in steps])
    return np.unique(graph_polyline(g, pts, space))


def loewner_profile(space: SpaceModel, Q: float, t_list, scale: float = 1.0, *,
                    h: float | None = None, stencil_level: int = 2,
                    solver_kwargs: dict | None = None) -> list[LoewnerSample]:
    """Moduli of horizontal-segment pairs at separations ~ t*scale, all t on
    one shared graph sized for the smallest separation.

    Each pair realizes separation/diameter <= t, so each result samples the
    Loewner function at t for the family restricted to the covered box.
    """
    t_list = sorted(float(t) for t in np.atleast_1d(t_list))
    if t_list[0] <= 0:
        raise ValueError("t must be positive")
    if h is None:
        h = min(t_list[0] * scale / 4.0, scale / 14.0)
    base_e = np.zeros(3)
    margin = 0.5 * scale
    u = np.zeros(space.frame_dim)
    u[0] = 1.0
    seg_pts = [space.constant_flow(base_e, u, s) for s in np.linspace(0.0, scale, 9)]
    seg_pts += [p + np.array([0.0, t_list[-1] * scale, 0.0]) for p in seg_pts]
    los, his = [], []
    for p in seg_pts:
        lo, hi = space.coordinate_bounds(p, margin)
        los.append(lo)
        his.append(hi)
    lo = np.min(np.array(los), axis=0)
    hi = np.max(np.array(his), axis=0)
    spacing = None
    if space.space_id == "heisenberg":
        spacing = np.array([h, h, max((scale ** 2) / 10.0, h / 2.0)])
    g = build_flow_graph(space, base_e, scale + margin, h,
                         bounds=(lo, hi), spacing=spacing, stencil_level=stencil_level)
    E = _segment_nodes(space, g, base_e, scale, h / 2.0)
    out = []
    for t in t_list:
        base_f = np.array([0.0, t * scale, 0.0])
        F = _segment_nodes(space, g, base_f, scale, h / 2.0)
        F = np.setdiff1d(F, E)
        fam = CurveFamily(g, E, F)
        result = q_modulus(fam, Q, **(solver_kwargs or {}))
        dist_e = graph_distance(g, int(E[0]))
        diam_e = float(np.max(dist_e[E]))
        sep_meas = float(np.min(
            _dijkstra(g.csr(), directed=False, indices=E, min_only=True)[F]
        ))
        dist_f = graph_distance(g, int(F[0]))
        diam_f = float(np.max(dist_f[F]))
        out.append(LoewnerSample(
            t=float(t),
            separation=sep_meas,
            min_diam=min(diam_e, diam_f),
            modulus=result,
        ))
    return out


def loewner_estimate(space: SpaceModel, Q: float, t: float, scale: float = 1.0, *,
                     h: float | None = None, stencil_level: int = 2,
                     solver_kwargs: dict | None = None) -> LoewnerSample:
    """Single-separation version of :func:`loewner_profile`."""
    return loewner_profile(space, Q, [t], scale, h=h, stencil_level=stencil_level,
                           solver_kwargs=solver_kwargs)[0]
