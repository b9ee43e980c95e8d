"""Tree-reweighted max-product: reparameterization, message passing and
tree-based updates, plus the certificate search that turns a fixed point into
a provably optimal assignment.

All state lives in the log domain.  Updates are fully synchronous (every node
and edge is updated from the previous iterate), optionally damped by linear
combination of old and new logs, and re-normalized so the largest entry of
every table is 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .model import Edge, PairwiseMrf, Potentials, StructureError
from .trees import SpanningTree, TreeDistribution, edge_appearance
from .treedp import (MaxMarginals, _guard_states, assignment_scores,
                     tree_map_value, tree_max_marginals)

CERT_TIE_TOL = 1e-9
CERT_SEARCH_GUARD = 1_000_000


class PseudoMaxMarginals(MaxMarginals):
    """Max-marginal-shaped tables on every edge of a graph with cycles."""


@dataclass(frozen=True)
class MessageSet:
    """Directed positive messages, one vector per edge direction, as logs.

    log_m[(t, s)] is the log message sent from t to s, indexed by states of s.
    """

    log_m: Mapping[tuple, np.ndarray]

    def max_log_change(self, other: "MessageSet") -> float:
        return max(float(np.max(np.abs(v - other.log_m[k])))
                   for k, v in self.log_m.items())


def unit_messages(mrf: PairwiseMrf) -> MessageSet:
    logs = {}
    for (s, t) in mrf.edges:
        logs[(t, s)] = np.zeros(mrf.cardinalities[s])
        logs[(s, t)] = np.zeros(mrf.cardinalities[t])
    return MessageSet(logs)


@dataclass(frozen=True)
class TrwConfig:
    damping: float = 0.5
    tol: float = 1e-8
    max_iterations: int = 2000
    tie_tol: float = CERT_TIE_TOL

    def __post_init__(self):
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass(frozen=True)
class TrwResult:
    """Outcome of an iterative run.

    messages_per_edge counts one unit per directed message computed for the
    synchronous variants (two per edge per iteration), and one unit per edge
    touched per tree max-marginal pass for the tree-update variant, divided
    by the number of graph edges.
    """

    nu: PseudoMaxMarginals
    iterations: int
    converged: bool
    certificate: np.ndarray | None
    certificate_indeterminate: bool
    bound_trace: tuple
    messages: MessageSet | None
    variant: str
    terminated_by: str
    messages_per_edge: float


def uniform_rho(mrf: PairwiseMrf) -> dict:
    """Uniform edge appearance weights (n-1)/|E| on every edge."""
    if not mrf.edges:
        raise StructureError("model has no edges")
    r = (mrf.node_count - 1) / len(mrf.edges)
    return {e: r for e in mrf.edges}


def resolve_rho(mrf: PairwiseMrf, dist_or_rho=None):
    """Return (explicit distribution or None, per-edge rho dict)."""
    if dist_or_rho is None:
        return None, uniform_rho(mrf)
    if isinstance(dist_or_rho, TreeDistribution):
        return dist_or_rho, edge_appearance(dist_or_rho, mrf)
    rho = {mrf.edge_key(*e): float(r) for e, r in dict(dist_or_rho).items()}
    missing = [e for e in mrf.edges if e not in rho or rho[e] <= 0]
    if missing:
        raise StructureError(f"rho_e missing or non-positive on edges {missing}")
    return None, rho


def init_pseudo(mrf: PairwiseMrf, rho_e: Mapping[Edge, float]) -> PseudoMaxMarginals:
    """Starting pseudo-max-marginals: node tables from theta, edge tables from
    the edge table scaled by 1/rho plus both node tables, max-normalized."""
    log_node = []
    for s in range(mrf.node_count):
        v = np.asarray(mrf.theta_node[s], dtype=float)
        log_node.append(v - v.max())
    log_edge = {}
    for (s, t) in mrf.edges:
        r = rho_e[(s, t)]
        if r <= 0:
            raise StructureError(f"rho_e on edge {(s, t)} must be positive")
        m = (mrf.theta_edge[(s, t)] / r
             + np.asarray(mrf.theta_node[s])[:, None]
             + np.asarray(mrf.theta_node[t])[None, :])
        log_edge[(s, t)] = m - m.max()
    return PseudoMaxMarginals(tuple(log_node), log_edge)


def _damp(new: np.ndarray, old: np.ndarray, lam: float) -> np.ndarray:
    return new if lam >= 1.0 else lam * new + (1.0 - lam) * old


def reparameterization_step(nu: PseudoMaxMarginals, rho_e: Mapping[Edge, float],
                            damping: float = 1.0) -> PseudoMaxMarginals:
    """One synchronous edge-based reparameterization update.

    Every node table absorbs the rho-weighted row-max corrections of all its
    incident edge tables; every edge table is recentred by its row and column
    maxima and re-attached to the new node tables.  The update is computed
    from the previous iterate throughout, then damped in the log domain and
    re-normalized.
    """
    edges = sorted(nu.log_edge)
    row_max = {}
    col_max = {}
    for (s, t) in edges:
        m = nu.log_edge[(s, t)]
        row_max[(s, t)] = m.max(axis=1)
        col_max[(s, t)] = m.max(axis=0)
    new_node = [np.asarray(v, dtype=float).copy() for v in nu.log_node]
    for (s, t) in edges:
        r = rho_e[(s, t)]
        new_node[s] += r * (row_max[(s, t)] - nu.log_node[s])
        new_node[t] += r * (col_max[(s, t)] - nu.log_node[t])
    new_node = [v - v.max() for v in new_node]
    new_edge = {}
    for (s, t) in edges:
        m = (nu.log_edge[(s, t)] - row_max[(s, t)][:, None] - col_max[(s, t)][None, :]
             + new_node[s][:, None] + new_node[t][None, :])
        new_edge[(s, t)] = m - m.max()
    if damping < 1.0:
        new_node = [_damp(v, old, damping) for v, old in zip(new_node, nu.log_node)]
        new_node = [v - v.max() for v in new_node]
        new_edge = {e: _damp(m, nu.log_edge[e], damping) for e, m in new_edge.items()}
        new_edge = {e: m - m.max() for e, m in new_edge.items()}
    return PseudoMaxMarginals(tuple(new_node), new_edge)


def _belief_sums(mrf: PairwiseMrf, msgs: MessageSet, rho_e) -> list:
    """B_s = sum over neighbors v of rho_vs * log M_vs, per node."""
    b = [np.zeros(m) for m in mrf.cardinalities]
    for (s, t) in mrf.edges:
        r = rho_e[(s, t)]
        b[s] = b[s] + r * msgs.log_m[(t, s)]
        b[t] = b[t] + r * msgs.log_m[(s, t)]
    return b


def message_step(msgs: MessageSet, mrf: PairwiseMrf, rho_e: Mapping[Edge, float],
                 damping: float = 1.0) -> MessageSet:
    """One synchronous tree-reweighted message update for every direction.

    The new message from t to s maximizes, over the sender's states, the edge
    table scaled by 1/rho plus the sender's node table and its rho-weighted
    incoming messages, with the reverse-direction message subtracted at full
    weight.  With rho identically 1 this is the ordinary max-product update.
    """
    b = _belief_sums(mrf, msgs, rho_e)
    new = {}
    for (s, t) in mrf.edges:
        r = rho_e[(s, t)]
        table_st = mrf.theta_edge[(s, t)] / r  # rows: states of s, cols: of t
        # message t -> s (indexed by x_s): maximize over x_t
        src = mrf.theta_node[t] + b[t] - msgs.log_m[(s, t)]
        out = np.max(table_st + src[None, :], axis=1)
        new[(t, s)] = out - out.max()
        # message s -> t (indexed by x_t): maximize over x_s
        src = mrf.theta_node[s] + b[s] - msgs.log_m[(t, s)]
        out = np.max(table_st + src[:, None], axis=0)
        new[(s, t)] = out - out.max()
    if damping < 1.0:
        new = {k: _damp(v, msgs.log_m[k], damping) for k, v in new.items()}
        new = {k: v - v.max() for k, v in new.items()}
    return MessageSet(new)


def messages_to_pseudo(msgs: MessageSet, mrf: PairwiseMrf,
                       rho_e: Mapping[Edge, float]) -> PseudoMaxMarginals:
    """Pseudo-max-marginals induced by a message set, max-normalized."""
    b = _belief_sums(mrf, msgs, rho_e)
    log_node = []
    for s in range(mrf.node_count):
        v = mrf.theta_node[s] + b[s]
        log_node.append(v - v.max())
    log_edge = {}
    for (s, t) in mrf.edges:
        r = rho_e[(s, t)]
        left = mrf.theta_node[s] + b[s] - msgs.log_m[(t, s)]
        right = mrf.theta_node[t] + b[t] - msgs.log_m[(s, t)]
        m = mrf.theta_edge[(s, t)] / r + left[:, None] + right[None, :]
        log_edge[(s, t)] = m - m.max()
    return PseudoMaxMarginals(tuple(log_node), log_edge)


@dataclass(frozen=True)
class CertificateResult:
    assignment: np.ndarray | None
    indeterminate: bool = False

    def found(self) -> bool:
        return self.assignment is not None


def _search_common_config(cardinalities, candidates, allowed_pairs, guard):
    """Backtracking search with forward pruning for a configuration whose node
    states all lie in `candidates` and whose edge pairs are all `allowed`.

    Returns (assignment or None, indeterminate).  Complete unless the node
    guard trips, which is reported as indeterminate rather than absence.
    """
    n = len(cardinalities)
    adj = {s: [] for s in range(n)}
    for (s, t) in allowed_pairs:
        adj[s].append(t)
        adj[t].append(s)
    order = sorted(range(n), key=lambda s: (len(candidates[s]), s))
    rank = {s: i for i, s in enumerate(order)}
    domains = [list(candidates[s]) for s in range(n)]
    x = [-1] * n
    expanded = 0

    def pair_ok(s, t, js, jt):
        m = allowed_pairs[(s, t)] if s < t else allowed_pairs[(t, s)].T
        return bool(m[js, jt])

    def extend(pos, domains):
        nonlocal expanded
        if pos == n:
            return True, False
        s = order[pos]
        for j in domains[s]:
            expanded += 1
            if expanded > guard:
                return False, True
            x[s] = j
            pruned = {}
            ok = True
            for t in adj[s]:
                if rank[t] <= pos:
                    continue
                keep = [k for k in domains[t] if pair_ok(s, t, j, k)]
                if not keep:
                    ok = False
                    break
                pruned[t] = keep
            if ok:
                child = list(domains)
                for t, keep in pruned.items():
                    child[t] = keep
                found, indet = extend(pos + 1, child)
                if found or indet:
                    return found, indet
            x[s] = -1
        return False, False

    found, indet = extend(0, domains)
    if indet:
        return None, True
    if found:
        return np.array(x, dtype=int), False
    return None, False


def find_certificate(nu: PseudoMaxMarginals, mrf: PairwiseMrf,
                     tie_tol: float = CERT_TIE_TOL,
                     guard: int = CERT_SEARCH_GUARD) -> CertificateResult:
    """Search for an assignment that is optimal in every node table and every
    edge table of `nu` simultaneously (within `tie_tol` in the log domain).

    Such an assignment certifies MAP optimality at a fixed point of the
    tree-reweighted updates with valid edge appearance weights.
    """
    candidates = []
    for s in range(mrf.node_count):
        v = nu.log_node[s]
        candidates.append([j for j in range(len(v)) if v[j] >= v.max() - tie_tol])
    allowed = {}
    for (s, t) in mrf.edges:
        m = nu.log_edge[(s, t)]
        allowed[(s, t)] = m >= m.max() - tie_tol
    assignment, indet = _search_common_config(mrf.cardinalities, candidates, allowed, guard)
    return CertificateResult(assignment, indet)


def _theta_from_nu(nu: PseudoMaxMarginals, tree: SpanningTree) -> Potentials:
    """Tree parameter induced by nu: node logs everywhere, edge logs minus
    both node logs on tree edges."""
    node = tuple(np.asarray(v) for v in nu.log_node)
    edge = {}
    for (s, t) in tree.edges:
        m = nu.log_edge[(s, t)]
        edge[(s, t)] = m - node[s][:, None] - node[t][None, :]
    return Potentials(node, edge)


def _combined_potentials(nu: PseudoMaxMarginals, rho_e) -> Potentials:
    """rho-weighted combination of the induced tree parameters, closed form."""
    node = tuple(np.asarray(v) for v in nu.log_node)
    edge = {}
    for (s, t), m in nu.log_edge.items():
        edge[(s, t)] = rho_e[(s, t)] * (m - node[s][:, None] - node[t][None, :])
    return Potentials(node, edge)


def _constant_offset(mrf: PairwiseMrf, combined: Potentials) -> float:
    """Value of <combined - theta, phi(x)> at the all-zeros configuration."""
    total = 0.0
    for s in range(mrf.node_count):
        total += float(combined.node[s][0]) - float(mrf.theta_node[s][0])
    for (s, t) in mrf.edges:
        m = combined.edge.get((s, t))
        if m is not None:
            total += float(m[0, 0])
        total -= float(mrf.theta_edge[(s, t)][0, 0])
    return total


def check_reparameterization(nu_or_thetas, dist: TreeDistribution, mrf: PairwiseMrf,
                             max_states: int = 2 ** 24) -> float:
    """How far the rho-weighted tree parameters are from reproducing theta.

    Accepts either pseudo-max-marginals (tree parameters induced per edge) or
    an explicit list of Potentials aligned with the distribution's trees.
    Evaluates the difference of objectives over every configuration and
    returns the maximum deviation from its mean: zero means the combination
    equals theta up to an additive constant.
    """
    if isinstance(nu_or_thetas, MaxMarginals):
        rho_e = edge_appearance(dist, mrf)
        combined = _combined_potentials(nu_or_thetas, rho_e)
    else:
        thetas = list(nu_or_thetas)
        support = dist.support_items()
        if len(thetas) != len(support):
            raise ValueError("one Potentials per supported tree required")
        node = [np.zeros(m) for m in mrf.cardinalities]
        edge = {e: np.zeros_like(mrf.theta_edge[e]) for e in mrf.edges}
        for (tree, w), th in zip(support, thetas):
            for s in range(mrf.node_count):
                node[s] = node[s] + w * np.asarray(th.node[s])
            for e, m in th.edge.items():
                edge[e] = edge[e] + w * np.asarray(m)
        combined = Potentials(tuple(node), edge)
    diff_node = tuple(np.asarray(combined.node[s]) - mrf.theta_node[s]
                      for s in range(mrf.node_count))
    diff_edge = {e: combined.edge_or_zero(e, mrf.theta_edge[e].shape) - mrf.theta_edge[e]
                 for e in mrf.edges}
    _guard_states(mrf.cardinalities, max_states)
    d = assignment_scores(mrf.cardinalities, Potentials(diff_node, diff_edge))
    return float(np.max(np.abs(d - d.mean())))


def _bound_value(mrf: PairwiseMrf, nu: PseudoMaxMarginals,
                 dist: TreeDistribution, rho_e) -> float:
    """Current upper bound: rho-weighted optimal values of the induced tree
    problems, corrected by the additive constant separating their combination
    from theta."""
    total = 0.0
    for tree, w in dist.support_items():
        total += w * tree_map_value(mrf, tree, _theta_from_nu(nu, tree))
    return total - _constant_offset(mrf, _combined_potentials(nu, rho_e))


def run_trw(mrf: PairwiseMrf, dist_or_rho=None, config: TrwConfig | None = None,
            variant: str = "messages") -> TrwResult:
    """Iterate tree-reweighted updates to convergence or the iteration cap.

    variant "messages" runs message passing, "reparam" the direct
    reparameterization updates.  When an explicit tree distribution is
    supplied, the per-iteration upper bound is recorded.  Non-convergence is
    reported in the result, never raised.  After termination the certificate
    search runs on the final pseudo-max-marginals.
    """
    config = config or TrwConfig()
    dist, rho_e = resolve_rho(mrf, dist_or_rho)
    bound_trace = []
    iterations = 0
    converged = False
    messages = None
    if variant == "reparam":
        nu = init_pseudo(mrf, rho_e)
        if dist is not None:
            bound_trace.append(_bound_value(mrf, nu, dist, rho_e))
        for iterations in range(1, config.max_iterations + 1):
            new = reparameterization_step(nu, rho_e, config.damping)
            delta = new.max_log_change(nu)
            nu = new
            if dist is not None:
                bound_trace.append(_bound_value(mrf, nu, dist, rho_e))
            if delta < config.tol:
                converged = True
                break
    elif variant == "messages":
        messages = unit_messages(mrf)
        if dist is not None:
            bound_trace.append(_bound_value(
                mrf, messages_to_pseudo(messages, mrf, rho_e), dist, rho_e))
        for iterations in range(1, config.max_iterations + 1):
            new = message_step(messages, mrf, rho_e, config.damping)
            delta = new.max_log_change(messages)
            messages = new
            if dist is not None:
                bound_trace.append(_bound_value(
                    mrf, messages_to_pseudo(messages, mrf, rho_e), dist, rho_e))
            if delta < config.tol:
                converged = True
                break
        nu = messages_to_pseudo(messages, mrf, rho_e)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    cert = find_certificate(nu, mrf, config.tie_tol)
    return TrwResult(
        nu=nu,
        iterations=iterations,
        converged=converged,
        certificate=cert.assignment,
        certificate_indeterminate=cert.indeterminate,
        bound_trace=tuple(bound_trace),
        messages=messages,
        variant=variant,
        terminated_by="converged" if converged else "max_iterations",
        messages_per_edge=2.0 * iterations,
    )


def _split_parameter(mrf: PairwiseMrf, base: Potentials, dist: TreeDistribution,
                     rho_e) -> dict:
    """Per-tree parameters from a shared one: node tables as-is, edge tables
    scaled by 1/rho on tree edges, zero elsewhere."""
    out = {}
    for tree, _ in dist.support_items():
        edge = {}
        for e in tree.edges:
            edge[e] = np.asarray(base.edge_or_zero(e, mrf.theta_edge[e].shape)) / rho_e[e]
        out[tree] = Potentials(tuple(np.asarray(v) for v in base.node), edge)
    return out


def run_tree_updates(mrf: PairwiseMrf, dist: TreeDistribution,
                     config: TrwConfig | None = None) -> TrwResult:
    """Tree-based updates: exact max-marginals per supported tree, early exit
    on a shared optimal configuration, merge otherwise.

    Each iteration computes exact max-marginals for every supported tree, then
    looks for a configuration optimal in all of them (nodewise and edgewise);
    if found it is returned immediately and is MAP-optimal.  If the per-tree
    max-marginal values all agree instead, the state is a fixed point.  Else
    the rho-weighted log tables are merged into a new shared parameter (damped
    against the previous one) and re-split onto the trees.
    """
    if not isinstance(dist, TreeDistribution):
        raise TypeError("tree updates require an explicit tree distribution")
    config = config or TrwConfig()
    rho_e = edge_appearance(dist, mrf)
    support = dist.support_items()
    base = mrf.potentials
    thetas = _split_parameter(mrf, base, dist, rho_e)
    bound_trace = []
    converged = False
    terminated_by = "max_iterations"
    certificate = None
    indeterminate = False
    nus = None
    units_per_iter = sum(len(t.edges) for t, _ in support) / len(mrf.edges)
    iterations = 0
    for iterations in range(1, config.max_iterations + 1):
        nus = {tree: tree_max_marginals(mrf, tree, thetas[tree]) for tree, _ in support}
        bound_trace.append(
            sum(w * tree_map_value(mrf, tree, thetas[tree]) for tree, w in support)
            - _constant_offset(mrf, _combine_thetas(mrf, thetas, support)))
        certificate, indeterminate = _shared_tree_optimum(mrf, nus, support, config.tie_tol)
        if certificate is not None:
            converged = True
            terminated_by = "tree_agreement"
            break
        if _max_marginals_agree(nus, support, config.tol):
            converged = True
            terminated_by = "max_marginal_agreement"
            break
        merged = _merge_tree_potentials(mrf, nus, support)
        damped_node = tuple(_damp(np.asarray(m), np.asarray(o), config.damping)
                            for m, o in zip(merged.node, base.node))
        damped_edge = {e: _damp(np.asarray(merged.edge[e]),
                                np.asarray(base.edge_or_zero(e, mrf.theta_edge[e].shape)),
                                config.damping)
                       for e in mrf.edges}
        base = Potentials(damped_node, damped_edge)
        thetas = _split_parameter(mrf, base, dist, rho_e)
    nu = _assemble_nu(mrf, nus, support)
    return TrwResult(
        nu=nu,
        iterations=iterations,
        converged=converged,
        certificate=certificate,
        certificate_indeterminate=indeterminate,
        bound_trace=tuple(bound_trace),
        messages=None,
        variant="tree",
        terminated_by=terminated_by,
        messages_per_edge=units_per_iter * iterations,
    )


def _combine_thetas(mrf, thetas, support) -> Potentials:
    """Plain rho-weighted sum of per-tree parameters."""
    node = [np.zeros(m) for m in mrf.cardinalities]
    edge = {e: np.zeros_like(mrf.theta_edge[e]) for e in mrf.edges}
    for tree, w in support:
        th = thetas[tree]
        for s in range(mrf.node_count):
            node[s] = node[s] + w * np.asarray(th.node[s])
        for e in tree.edges:
            edge[e] = edge[e] + w * np.asarray(th.edge[e])
    return Potentials(tuple(node), edge)


def _merge_tree_potentials(mrf, nus, support) -> Potentials:
    """rho-weighted merge of per-tree max-marginals into one parameter."""
    node = [np.zeros(m) for m in mrf.cardinalities]
    edge = {e: np.zeros_like(mrf.theta_edge[e]) for e in mrf.edges}
    for tree, w in support:
        nu = nus[tree]
        for s in range(mrf.node_count):
            node[s] = node[s] + w * nu.log_node[s]
        for e in tree.edges:
            m = nu.log_edge[e]
            edge[e] = edge[e] + w * (m - nu.log_node[e[0]][:, None] - nu.log_node[e[1]][None, :])
    return Potentials(tuple(node), edge)


def _shared_tree_optimum(mrf, nus, support, tie_tol):
    """Configuration optimal for every supported tree, if one exists.

    Node candidates are the intersection of per-tree nodewise argmax sets;
    edge pairs must be argmax pairs in every tree containing the edge.  Local
    optimality on a tree characterizes its optimal set exactly, so this search
    decides non-emptiness of the intersection of the tree optima.
    """
    n = mrf.node_count
    candidates = []
    for s in range(n):
        cand = None
        for tree, _ in support:
            v = nus[tree].log_node[s]
            c = {j for j in range(len(v)) if v[j] >= v.max() - tie_tol}
            cand = c if cand is None else (cand & c)
        if not cand:
            return None, False
        candidates.append(sorted(cand))
    allowed = {}
    for (s, t) in mrf.edges:
        mask = None
        for tree, _ in support:
            if (s, t) not in set(tree.edges):
                continue
            m = nus[tree].log_edge[(s, t)]
            a = m >= m.max() - tie_tol
            mask = a if mask is None else (mask & a)
        if mask is not None:
            if not mask.any():
                return None, False
            allowed[(s, t)] = mask
        else:
            allowed[(s, t)] = np.ones((mrf.cardinalities[s], mrf.cardinalities[t]), dtype=bool)
    return _search_common_config(mrf.cardinalities, candidates, allowed, CERT_SEARCH_GUARD)


def _max_marginals_agree(nus, support, tol) -> bool:
    trees = [t for t, _ in support]
    first = nus[trees[0]]
    for other_tree in trees[1:]:
        other = nus[other_tree]
        for a, b in zip(first.log_node, other.log_node):
            if np.max(np.abs(a - b)) >= tol:
                return False
    for i, ta in enumerate(trees):
        for tb in trees[i + 1:]:
            shared = set(ta.edges) & set(tb.edges)
            for e in shared:
                if np.max(np.abs(nus[ta].log_edge[e] - nus[tb].log_edge[e])) >= tol:
                    return False
    return True


def _assemble_nu(mrf, nus, support) -> PseudoMaxMarginals:
    """Graph-wide tables from per-tree ones: rho-weighted log averages per
    node, and per edge over the trees containing it (diagnostic view; exact
    when the trees agree)."""
    node = [np.zeros(m) for m in mrf.cardinalities]
    edge = {}
    weight = {e: 0.0 for e in mrf.edges}
    acc = {e: np.zeros_like(mrf.theta_edge[e]) for e in mrf.edges}
    for tree, w in support:
        nu = nus[tree]
        for s in range(mrf.node_count):
            node[s] = node[s] + w * nu.log_node[s]
        for e in tree.edges:
            acc[e] = acc[e] + w * nu.log_edge[e]
            weight[e] += w
    for e in mrf.edges:
        m = acc[e] / weight[e]
        edge[e] = m - m.max()
    node = [v - v.max() for v in node]
    return PseudoMaxMarginals(tuple(node), edge)
