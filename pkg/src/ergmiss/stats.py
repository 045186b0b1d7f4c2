"""Model terms, global statistics and change statistics.

The same machinery describes the data model for ``X`` and the missingness
model for ``D``. Terms fall into three groups used by the missingness
taxonomy: structural (endogenous), covariate, and network-dependent terms
whose covariate graph is the true network (:data:`NETWORK`).
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels as K
from .graph import Graph, NodeData, dyad_index

NETWORK = "network"
LOG2 = math.log(2.0)

STRUCTURAL = ("edges", "altkstar", "gwdegree", "gwesp")
NODE_TERMS = ("nodecov", "absdiff", "nodematch")
GRAPH_TERMS = ("edgecov", "degreecov")
KINDS = STRUCTURAL + NODE_TERMS + GRAPH_TERMS


@dataclass(frozen=True, eq=False)
class Term:
    """One sufficient statistic.

    ``decay`` is lambda for ``altkstar`` and alpha for ``gwdegree``/``gwesp``.
    ``attr`` names a node column; ``graph`` is a :class:`Graph`, a square
    dyadic covariate matrix, or :data:`NETWORK` for the conditioning network.
    """

    kind: str
    decay: float | None = None
    attr: str | None = None
    graph: object = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown term kind {self.kind!r}")
        if self.kind == "altkstar":
            lam = 2.0 if self.decay is None else float(self.decay)
            if not lam > 1.0:
                raise ValueError("altkstar lambda must exceed 1")
            object.__setattr__(self, "decay", lam)
        elif self.kind in ("gwdegree", "gwesp"):
            alpha = LOG2 if self.decay is None else float(self.decay)
            if not alpha > 0.0:
                raise ValueError(f"{self.kind} alpha must be positive")
            object.__setattr__(self, "decay", alpha)
        if self.kind in NODE_TERMS and not self.attr:
            raise ValueError(f"{self.kind} needs a node attribute")
        if self.kind in GRAPH_TERMS and self.graph is None:
            raise ValueError(f"{self.kind} needs a covariate graph")

    @property
    def group(self) -> str:
        """'structural', 'covariate' or 'network'."""
        if self.kind in STRUCTURAL:
            return "structural"
        if isinstance(self.graph, str) and self.graph == NETWORK:
            return "network"
        return "covariate"

    @property
    def name(self) -> str:
        if self.kind == "edges":
            return "edges"
        if self.kind in ("altkstar", "gwdegree", "gwesp"):
            return f"{self.kind}({self.decay:.4g})"
        if self.kind in NODE_TERMS:
            return f"{self.kind}({self.attr})"
        tag = NETWORK if self.group == "network" else "cov"
        return f"{self.kind}({tag})"

    def __repr__(self):
        return f"Term({self.name})"


def edges() -> Term:
    return Term("edges")


def altkstar(lam: float = 2.0) -> Term:
    return Term("altkstar", decay=lam)


def gwdegree(alpha: float = LOG2) -> Term:
    return Term("gwdegree", decay=alpha)


def gwesp(alpha: float = LOG2) -> Term:
    return Term("gwesp", decay=alpha)


def nodecov(attr: str) -> Term:
    return Term("nodecov", attr=attr)


def absdiff(attr: str) -> Term:
    return Term("absdiff", attr=attr)


def nodematch(attr: str) -> Term:
    return Term("nodematch", attr=attr)


def edgecov(graph=NETWORK) -> Term:
    return Term("edgecov", graph=graph)


def degreecov(graph=NETWORK) -> Term:
    return Term("degreecov", graph=graph)


_TERM_RE = re.compile(r"^\s*([a-z]+)\s*(?:\((.*)\))?\s*$")


def _parse_number(text: str) -> float:
    text = text.strip()
    m = re.fullmatch(r"log\((.+)\)", text)
    if m:
        return math.log(float(m.group(1)))
    return float(text)


def parse_term(text: str) -> Term:
    """Parse ``"gwesp(log(2))"``, ``"altkstar(2)"``, ``"nodematch(Prison)"`` etc.

    Graph terms accept only ``network`` as argument here; dyadic covariate
    matrices must be passed programmatically.
    """
    m = _TERM_RE.match(text)
    if not m:
        raise ValueError(f"cannot parse term {text!r}")
    kind, arg = m.group(1), m.group(2)
    if kind not in KINDS:
        raise ValueError(f"unknown term kind {kind!r}")
    if kind == "edges":
        if arg:
            raise ValueError("edges takes no argument")
        return edges()
    if kind in ("altkstar", "gwdegree", "gwesp"):
        return Term(kind, decay=_parse_number(arg) if arg else None)
    if kind in NODE_TERMS:
        if not arg:
            raise ValueError(f"{kind} needs an attribute name")
        return Term(kind, attr=arg.strip())
    if arg and arg.strip() != NETWORK:
        raise ValueError(f"{kind} only accepts 'network' in text form")
    return Term(kind, graph=NETWORK)


@dataclass(frozen=True, eq=False)
class ModelSpec:
    terms: tuple
    theta: np.ndarray

    def __init__(self, terms: Sequence[Term], theta=None):
        terms = tuple(t if isinstance(t, Term) else parse_term(t) for t in terms)
        if theta is None:
            theta = np.zeros(len(terms))
        theta = np.array(theta, dtype=float).reshape(-1)
        if theta.shape[0] != len(terms):
            raise ValueError(f"{len(terms)} terms but {theta.shape[0]} parameters")
        if not np.all(np.isfinite(theta)):
            raise ValueError("parameters must be finite")
        theta.flags.writeable = False
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "theta", theta)

    def __len__(self):
        return len(self.terms)

    @property
    def names(self) -> list[str]:
        return [t.name for t in self.terms]

    def with_theta(self, theta) -> "ModelSpec":
        return ModelSpec(self.terms, theta)

    def nonzero(self) -> "ModelSpec":
        keep = [k for k, v in enumerate(self.theta) if v != 0.0]
        return ModelSpec([self.terms[k] for k in keep], self.theta[keep])

    def group_theta(self, group: str) -> np.ndarray:
        return np.array([v for t, v in zip(self.terms, self.theta) if t.group == group])


def _as_terms(spec) -> tuple:
    if isinstance(spec, ModelSpec):
        return spec.terms
    return tuple(t if isinstance(t, Term) else parse_term(t) for t in spec)


def _resolve_graph(term: Term, n: int, network) -> np.ndarray:
    g = term.graph
    if isinstance(g, str):
        if network is None:
            raise ValueError(f"{term.name} needs the conditioning network")
        g = network
    a = g.adj if isinstance(g, Graph) else np.asarray(g, dtype=float)
    if a.shape != (n, n):
        raise ValueError(f"{term.name}: covariate graph has shape {a.shape}, expected {(n, n)}")
    return np.asarray(a, dtype=float)


def dyad_weights(term: Term, n: int, data: NodeData | None = None, network=None) -> np.ndarray:
    """Per-dyad weight matrix W with z = sum_{i<j} x_ij W_ij (dyad-independent terms)."""
    if term.kind == "edges":
        w = np.ones((n, n))
    elif term.kind in NODE_TERMS:
        if data is None:
            raise ValueError(f"{term.name} needs node data")
        if data.n != n:
            raise ValueError(f"node data has {data.n} rows, graph has {n} vertices")
        col = data.column(term.attr)
        if term.kind == "nodematch":
            w = (col[:, None] == col[None, :]).astype(float)
        else:
            if term.attr not in data.numeric:
                raise ValueError(f"{term.name} needs a numeric attribute")
            c = data.numeric[term.attr]
            w = c[:, None] + c[None, :] if term.kind == "nodecov" else np.abs(c[:, None] - c[None, :])
    elif term.kind == "edgecov":
        w = _resolve_graph(term, n, network).copy()
    elif term.kind == "degreecov":
        deg = _resolve_graph(term, n, network).sum(axis=1)
        w = deg[:, None] + deg[None, :]
    else:
        raise ValueError(f"{term.name} is not dyad-independent")
    np.fill_diagonal(w, 0.0)
    return w


@dataclass(frozen=True, eq=False)
class Compiled:
    """Array form of a term list consumed by the kernels."""

    kinds: np.ndarray
    scale: np.ndarray
    weights: np.ndarray
    rpow: np.ndarray
    need_sp: bool

    @property
    def p(self) -> int:
        return self.kinds.shape[0]


def compile_terms(spec, n: int, data: NodeData | None = None, network=None) -> Compiled:
    terms = _as_terms(spec)
    p = len(terms)
    kinds = np.zeros(p, dtype=np.int64)
    scale = np.zeros(p)
    weights = np.zeros((p, n, n))
    rpow = np.zeros((p, n + 1))
    powers = np.arange(n + 1, dtype=float)
    for t, term in enumerate(terms):
        if term.kind == "altkstar":
            kinds[t] = K.ALTKSTAR
            scale[t] = term.decay
            rpow[t] = (1.0 - 1.0 / term.decay) ** powers
        elif term.kind == "gwdegree":
            kinds[t] = K.GWDEGREE
            rpow[t] = (1.0 - math.exp(-term.decay)) ** powers
        elif term.kind == "gwesp":
            kinds[t] = K.GWESP
            scale[t] = math.exp(term.decay)
            rpow[t] = (1.0 - math.exp(-term.decay)) ** powers
        else:
            kinds[t] = K.DYADIC
            weights[t] = dyad_weights(term, n, data, network)
    return Compiled(kinds, scale, weights, rpow, bool(np.any(kinds == K.GWESP)))


def stat_vector(spec, g: Graph, data: NodeData | None = None, network=None) -> np.ndarray:
    """Global statistic vector z(g), one entry per term."""
    terms = _as_terms(spec)
    a = g.adj.astype(np.int64)
    deg = a.sum(axis=1)
    out = np.zeros(len(terms))
    sp = None
    for t, term in enumerate(terms):
        if term.kind == "altkstar":
            lam = term.decay
            r = 1.0 - 1.0 / lam
            out[t] = lam * lam * np.sum(r ** deg - 1.0 + deg / lam)
        elif term.kind == "gwdegree":
            alpha = term.decay
            r = 1.0 - math.exp(-alpha)
            out[t] = math.exp(alpha) * np.sum(1.0 - r ** deg)
        elif term.kind == "gwesp":
            if sp is None:
                sp = a @ a
            alpha = term.decay
            r = 1.0 - math.exp(-alpha)
            rows, cols = dyad_index(g.n)
            on = a[rows, cols] == 1
            esp = sp[rows[on], cols[on]]
            out[t] = math.exp(alpha) * np.sum(1.0 - r ** esp)
        else:
            w = dyad_weights(term, g.n, data, network)
            out[t] = 0.5 * float(np.sum(a * w))
    return out


def kernel_state(g: Graph) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Writable (adjacency, degree, shared-partner) arrays for the kernels."""
    adj = np.array(g.adj, dtype=np.uint8, copy=True)
    a = adj.astype(np.int64)
    return adj, a.sum(axis=1), a @ a


def change_stat(spec, g: Graph, dyad: tuple[int, int], data: NodeData | None = None,
                network=None) -> np.ndarray:
    """z(g with dyad present) - z(g with dyad absent)."""
    i, j = dyad
    if i == j:
        raise ValueError("dyad endpoints must differ")
    comp = compile_terms(spec, g.n, data, network)
    adj, deg, sp = kernel_state(g)
    out = np.empty(comp.p)
    K.change_stats(adj, deg, sp, int(i), int(j), comp.kinds, comp.scale, comp.weights,
                   comp.rpow, out)
    return out


def change_matrix(spec, g: Graph, data: NodeData | None = None, network=None) -> np.ndarray:
    """Change statistics of every dyad (canonical order), shape (N, p)."""
    comp = compile_terms(spec, g.n, data, network)
    adj, deg, sp = kernel_state(g)
    di, dj = dyad_index(g.n)
    out = np.empty((di.shape[0], comp.p))
    K.all_change_stats(adj, deg, sp, comp.kinds, comp.scale, comp.weights, comp.rpow,
                       di, dj, out)
    return out


def degree_cov_stat(d: Graph, x: Graph) -> float:
    """Sum over missing dyads of the endpoints' degrees in the true network."""
    if d.n != x.n:
        raise ValueError(f"dimension mismatch: {d.n} vs {x.n} vertices")
    deg = x.adj.sum(axis=1).astype(float)
    rows, cols = dyad_index(d.n)
    on = d.adj[rows, cols] == 1
    return float(np.sum(deg[rows[on]] + deg[cols[on]]))
