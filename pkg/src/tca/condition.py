"""The transmission-channel condition language and its evaluators.

Conditions are Boolean formulas over system variables, written as
``name_horizon`` atoms (``ffr_0``), raw indices (``x12``), the
constants ``true``/``false``, and the operators ``!`` > ``&`` > ``|``
with parentheses.  A parsed condition is normalised into signed
conjunction terms; each term is evaluated by deleting edges from
``(B, Omega)`` and re-solving, which prices exactly the paths the term
admits.  An alternative evaluator works from IRF matrices alone.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import (
    DimensionMismatchError,
    HorizonOutOfRangeError,
    ParseError,
    TermExplosionError,
    UnknownVariableError,
    UnsupportedConditionError,
)
from .linalg import solve_unit_lower
from .system import SingleShockSystem, SystemsForm

__all__ = [
    "Var",
    "Not",
    "And",
    "Or",
    "TRUE",
    "FALSE",
    "TransmissionCondition",
    "ConjunctionTerm",
    "EffectTable",
    "parse_condition",
    "expand_terms",
    "effect_by_edge_deletion",
    "transmission_effect",
    "effect_from_irfs",
    "satisfied_by",
    "any_horizon",
]

TERM_CAP = 1_000_000


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Var:
    """A system variable, 1-based index ``m = horizon*K + position``."""

    index: int


@dataclass(frozen=True)
class Not:
    child: object


@dataclass(frozen=True)
class And:
    left: object
    right: object


@dataclass(frozen=True)
class Or:
    left: object
    right: object


class _Const:
    def __init__(self, value: bool):
        self.value = value

    def __repr__(self):
        return "TRUE" if self.value else "FALSE"


TRUE = _Const(True)
FALSE = _Const(False)


def _to_text(node, parent_prec: int = 0) -> str:
    # precedence: atoms 3, ! 2, & 1, | 0
    if isinstance(node, Var):
        return f"x{node.index}"
    if node is TRUE:
        return "true"
    if node is FALSE:
        return "false"
    if isinstance(node, Not):
        return f"!{_to_text(node.child, 2)}"
    if isinstance(node, And):
        s = f"{_to_text(node.left, 1)} & {_to_text(node.right, 1)}"
        return f"({s})" if parent_prec > 1 else s
    if isinstance(node, Or):
        s = f"{_to_text(node.left, 0)} | {_to_text(node.right, 0)}"
        return f"({s})" if parent_prec > 0 else s
    raise TypeError(f"not an AST node: {node!r}")


@dataclass(frozen=True)
class TransmissionCondition:
    """A parsed condition plus the grid it refers to."""

    root: object
    source: str
    K: int
    h: int
    labels: tuple = ()

    @property
    def size(self) -> int:
        return (self.h + 1) * self.K

    def canonical_text(self) -> str:
        """Raw-index rendering; reparses to an identical AST."""
        return _to_text(self.root)

    def __str__(self) -> str:
        return self.canonical_text()


# ---------------------------------------------------------------------------
# Parser

_TOKEN_RE = re.compile(r"\s*(?:(?P<op>[!&|()])|(?P<ident>[A-Za-z_][A-Za-z0-9_]*))")
_RAW_RE = re.compile(r"^x([0-9]+)$")


class _Parser:
    def __init__(self, text: str, labels, K: int, h: int):
        self.text = text
        self.labels = list(labels)
        self.K = K
        self.h = h
        self.pos = 0

    def error(self, message: str, pos: int | None = None, cls=ParseError):
        raise cls(message, self.pos if pos is None else pos)

    def peek(self):
        m = _TOKEN_RE.match(self.text, self.pos)
        if m is None:
            rest = self.text[self.pos :].lstrip()
            if rest:
                self.error(f"unexpected character {rest[0]!r}",
                           pos=len(self.text) - len(rest))
            return None, self.pos
        return m, m.start("op") if m.group("op") else m.start("ident")

    def take(self):
        m, start = self.peek()
        if m is None:
            return None, start
        self.pos = m.end()
        return (m.group("op") or m.group("ident")), start

    def parse(self):
        node = self.parse_or()
        tok, start = self.peek()
        if tok is not None:
            self.error("unexpected trailing input", pos=start)
        return node

    def parse_or(self):
        node = self.parse_and()
        while True:
            m, _ = self.peek()
            if m is None or m.group("op") != "|":
                return node
            self.take()
            node = Or(node, self.parse_and())

    def parse_and(self):
        node = self.parse_unary()
        while True:
            m, _ = self.peek()
            if m is None or m.group("op") != "&":
                return node
            self.take()
            node = And(node, self.parse_unary())

    def parse_unary(self):
        m, start = self.peek()
        if m is None:
            self.error("expected an atom, got end of input")
        if m.group("op") == "!":
            self.take()
            return Not(self.parse_unary())
        return self.parse_atom()

    def parse_atom(self):
        tok, start = self.take()
        if tok is None:
            self.error("expected an atom, got end of input")
        if tok == "(":
            node = self.parse_or()
            close, cstart = self.take()
            if close != ")":
                self.error("expected ')'", pos=cstart)
            return node
        if tok in ("!", "&", "|", ")"):
            self.error(f"expected an atom, got {tok!r}", pos=start)
        return self.resolve_ident(tok, start)

    def resolve_ident(self, ident: str, start: int):
        if ident == "true":
            return TRUE
        if ident == "false":
            return FALSE
        raw = _RAW_RE.match(ident)
        if raw:
            m = int(raw.group(1))
            if not 1 <= m <= (self.h + 1) * self.K:
                self.error(
                    f"system index {m} outside 1..{(self.h + 1) * self.K}",
                    pos=start,
                    cls=HorizonOutOfRangeError,
                )
            return Var(m)
        name, sep, suffix = ident.rpartition("_")
        if not sep or not suffix.isdigit():
            self.error(
                f"atom {ident!r} is neither name_horizon nor x<index>",
                pos=start,
            )
        if name not in self.labels:
            self.error(
                f"unknown variable {name!r}; ordering has {self.labels}",
                pos=start,
                cls=UnknownVariableError,
            )
        t = int(suffix)
        if t > self.h:
            self.error(
                f"horizon {t} outside 0..{self.h}",
                pos=start,
                cls=HorizonOutOfRangeError,
            )
        return Var(t * self.K + self.labels.index(name) + 1)


def parse_condition(text: str, var_names, K: int, h: int) -> TransmissionCondition:
    """Parse condition text against an ordering.

    ``var_names`` are the post-ordering labels; the atom ``name_t``
    resolves to system index ``t*K + position``.  Raw ``x<m>`` atoms are
    accepted for scripting.  Conditions can only reference variables;
    there is no syntax for shocks.
    """
    labels = tuple(str(n) for n in var_names)
    if len(labels) != K:
        raise DimensionMismatchError(f"expected {K} labels, got {len(labels)}")
    root = _Parser(text, labels, K, h).parse()
    return TransmissionCondition(root=root, source=text, K=K, h=h, labels=labels)


# ---------------------------------------------------------------------------
# Expansion into signed conjunction terms


@dataclass(frozen=True)
class ConjunctionTerm:
    """``sign * (all of required on the path, none of forbidden)``."""

    sign: int
    required: frozenset
    forbidden: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "required", frozenset(self.required))
        object.__setattr__(self, "forbidden", frozenset(self.forbidden))
        if self.required & self.forbidden:
            raise ValueError("required and forbidden literals overlap")

    @property
    def required_sorted(self) -> tuple:
        return tuple(sorted(self.required))

    @property
    def forbidden_sorted(self) -> tuple:
        return tuple(sorted(self.forbidden))


def _nnf(node, negated: bool = False):
    if isinstance(node, Var):
        return Not(node) if negated else node
    if node is TRUE:
        return FALSE if negated else TRUE
    if node is FALSE:
        return TRUE if negated else FALSE
    if isinstance(node, Not):
        return _nnf(node.child, not negated)
    if isinstance(node, And):
        cls = Or if negated else And
        return cls(_nnf(node.left, negated), _nnf(node.right, negated))
    if isinstance(node, Or):
        cls = And if negated else Or
        return cls(_nnf(node.left, negated), _nnf(node.right, negated))
    raise TypeError(f"not an AST node: {node!r}")


def _combine(a, b, cap):
    out = []
    for s1, r1, f1 in a:
        for s2, r2, f2 in b:
            out.append((s1 * s2, r1 | r2, f1 | f2))
            if len(out) > cap:
                raise TermExplosionError(f"more than {cap} raw terms")
    return out


def _expand_ie(node, cap):
    """Inclusion-exclusion directly on the formula tree."""
    if isinstance(node, Var):
        return [(1, frozenset([node.index]), frozenset())]
    if isinstance(node, Not):  # NNF keeps negation only on atoms
        return [(1, frozenset(), frozenset([node.child.index]))]
    if node is TRUE:
        return [(1, frozenset(), frozenset())]
    if node is FALSE:
        return []
    if isinstance(node, And):
        return _combine(_expand_ie(node.left, cap), _expand_ie(node.right, cap), cap)
    if isinstance(node, Or):
        a = _expand_ie(node.left, cap)
        b = _expand_ie(node.right, cap)
        both = _combine(a, b, cap)
        out = a + b + [(-s, r, f) for s, r, f in both]
        if len(out) > cap:
            raise TermExplosionError(f"more than {cap} raw terms")
        return out
    raise TypeError(f"not an AST node: {node!r}")


def _dnf_disjuncts(node, cap):
    """NNF tree -> list of (required, forbidden) conjunctions."""
    if isinstance(node, Var):
        return [(frozenset([node.index]), frozenset())]
    if isinstance(node, Not):
        return [(frozenset(), frozenset([node.child.index]))]
    if node is TRUE:
        return [(frozenset(), frozenset())]
    if node is FALSE:
        return []
    if isinstance(node, Or):
        out = _dnf_disjuncts(node.left, cap) + _dnf_disjuncts(node.right, cap)
        if len(out) > cap:
            raise TermExplosionError(f"more than {cap} DNF disjuncts")
        return out
    if isinstance(node, And):
        left = _dnf_disjuncts(node.left, cap)
        right = _dnf_disjuncts(node.right, cap)
        out = []
        for r1, f1 in left:
            for r2, f2 in right:
                out.append((r1 | r2, f1 | f2))
                if len(out) > cap:
                    raise TermExplosionError(f"more than {cap} DNF disjuncts")
        return out
    raise TypeError(f"not an AST node: {node!r}")


def _expand_disjuncts(disjuncts, cap, budget):
    """Signed terms for a union of conjunctions, made disjoint pairwise."""
    if not disjuncts:
        return []
    head, rest = disjuncts[0], disjuncts[1:]
    budget[0] += 1
    if budget[0] > cap:
        raise TermExplosionError(f"more than {cap} expansion steps")
    if not rest:
        return [(1, head[0], head[1])]
    # conjunctions with a contradictory literal admit no paths; dropping
    # them from a union leaves the union unchanged
    overlap = [
        (r, f)
        for r, f in ((head[0] | r, head[1] | f) for r, f in rest)
        if not r & f
    ]
    out = (
        [(1, head[0], head[1])]
        + _expand_disjuncts(rest, cap, budget)
        + [(-s, r, f) for s, r, f in _expand_disjuncts(overlap, cap, budget)]
    )
    if len(out) > cap:
        raise TermExplosionError(f"more than {cap} raw terms")
    return out


def expand_terms(cond, method: str = "ie", cap: int = TERM_CAP):
    """Normalise a condition to signed conjunction terms.

    Negations are pushed to the literals first; disjunctions are then
    priced by inclusion-exclusion, either directly on the tree
    (``method="ie"``) or after flattening to disjunctive normal form
    (``method="dnf"``).  Both give the same summed effect.  Terms with a
    literal both required and forbidden are contradictory and dropped;
    duplicate terms are merged by summing signs.
    """
    root = cond.root if isinstance(cond, TransmissionCondition) else cond
    return list(_expand_cached(root, method, cap))


@lru_cache(maxsize=512)
def _expand_cached(root, method: str, cap: int) -> tuple:
    tree = _nnf(root)
    if method == "ie":
        raw = _expand_ie(tree, cap)
    elif method == "dnf":
        raw = _expand_disjuncts(_dnf_disjuncts(tree, cap), cap, [0])
    else:
        raise ValueError(f"unknown expansion method {method!r}")

    merged = {}
    for s, req, forb in raw:
        if req & forb:
            continue
        key = (req, forb)
        merged[key] = merged.get(key, 0) + s
    return tuple(
        ConjunctionTerm(sign=s, required=req, forbidden=forb)
        for (req, forb), s in merged.items()
        if s != 0
    )


# ---------------------------------------------------------------------------
# Evaluation on paths (used by the brute-force oracle)


def satisfied_by(cond, nodes) -> bool:
    """Whether a path visiting exactly ``nodes`` satisfies the condition.

    ``nodes`` are the path's variable nodes including its endpoint, so a
    condition on the endpoint itself is trivially true.
    """
    node_set = frozenset(int(n) for n in nodes)
    root = cond.root if isinstance(cond, TransmissionCondition) else cond

    def ev(n):
        if isinstance(n, Var):
            return n.index in node_set
        if n is TRUE:
            return True
        if n is FALSE:
            return False
        if isinstance(n, Not):
            return not ev(n.child)
        if isinstance(n, And):
            return ev(n.left) and ev(n.right)
        if isinstance(n, Or):
            return ev(n.left) or ev(n.right)
        raise TypeError(f"not an AST node: {n!r}")

    return ev(root)


def any_horizon(name: str, horizons) -> str:
    """Convenience: ``name_t`` OR-ed over the given horizons."""
    hs = list(horizons)
    if not hs:
        raise ValueError("need at least one horizon")
    return " | ".join(f"{name}_{t}" for t in hs)


# ---------------------------------------------------------------------------
# Edge-deletion evaluation


def effect_by_edge_deletion(B, omega_col, term: ConjunctionTerm,
                         xi: float = 1.0) -> np.ndarray:
    """Effects of one conjunction term on every system index at once.

    For each required literal ``k``, edges jumping over ``k`` (from
    below ``k`` into above ``k``) are deleted; for each forbidden ``k``,
    edges into ``k`` are deleted.  One triangular solve then prices all
    surviving paths for every target.  Targets below the largest
    required literal admit no path and are zeroed; a required literal
    equal to the target is trivially satisfied (every path ends there).
    """
    B = np.array(B, dtype=float)
    col = np.array(omega_col, dtype=float).reshape(-1)
    n = B.shape[0]
    if col.shape[0] != n:
        raise DimensionMismatchError("omega_col does not match B")
    for k in term.required_sorted:
        if k < 1 or k > n:
            raise DimensionMismatchError(f"literal {k} outside 1..{n}")
        B[k:, : k - 1] = 0.0
        col[k:] = 0.0
    for k in term.forbidden_sorted:
        if k < 1 or k > n:
            raise DimensionMismatchError(f"literal {k} outside 1..{n}")
        B[k - 1, : k - 1] = 0.0
        col[k - 1] = 0.0
    v = xi * solve_unit_lower(B, col)
    if term.required:
        v[: max(term.required) - 1] = 0.0
    return v


@dataclass(frozen=True)
class EffectTable:
    """Total / channel / complement effects per (variable, horizon).

    Arrays are shaped ``(h+1, K)`` with columns in ordered-variable
    order; ``complement`` is defined as ``total - channel``, so the
    decomposition identity holds by construction and is additionally
    re-checked by :meth:`max_identity_gap`.
    """

    shock_label: str
    condition: str
    labels: tuple
    xi: float
    total: np.ndarray
    channel: np.ndarray
    complement: np.ndarray

    @property
    def K(self) -> int:
        return len(self.labels)

    @property
    def h(self) -> int:
        return self.total.shape[0] - 1

    def max_identity_gap(self) -> float:
        """Largest relative gap of channel + complement against total."""
        gap = np.abs(self.channel + self.complement - self.total)
        scale = np.maximum(1.0, np.abs(self.total))
        return float(np.max(gap / scale)) if gap.size else 0.0

    def cell(self, kind: str, position: int, horizon: int) -> float:
        """1-based ordered position, horizon in 0..h."""
        return float(getattr(self, kind)[horizon, position - 1])


def _resolve_system(system, shock):
    if isinstance(system, SystemsForm):
        if shock is None:
            raise ValueError("a SystemsForm needs an explicit shock index")
        return (
            system.B,
            system.shock_column(shock),
            system.ordering,
            system.K,
            system.h,
            f"eps[{shock}]",
        )
    if isinstance(system, SingleShockSystem):
        return (
            system.B,
            system.omega_col,
            system.ordering,
            system.K,
            system.h,
            system.shock_label,
        )
    raise TypeError(f"unsupported system type: {type(system).__name__}")


def transmission_effect(system, cond, shock: int | None = None,
                        xi: float = 1.0, method: str = "ie",
                        cap: int = TERM_CAP) -> EffectTable:
    """Decompose the total effect of one shock along a condition.

    ``system`` is a full :class:`SystemsForm` (pass ``shock``) or a
    :class:`SingleShockSystem`.  ``cond`` may be text, parsed against
    the system's ordering.  The channel sums the signed edge-deletion
    effects of the expanded terms, in term order; the complement is the
    remainder of the total.
    """
    B, col, ordering, K, h, shock_label = _resolve_system(system, shock)
    if isinstance(cond, str):
        cond = parse_condition(cond, ordering.labels, K, h)
    total = xi * solve_unit_lower(B, col)
    channel = np.zeros_like(total)
    for term in expand_terms(cond, method=method, cap=cap):
        channel += term.sign * effect_by_edge_deletion(B, col, term, xi)
    shape = (h + 1, K)
    return EffectTable(
        shock_label=shock_label,
        condition=cond.source,
        labels=ordering.labels,
        xi=xi,
        total=total.reshape(shape),
        channel=channel.reshape(shape),
        complement=(total - channel).reshape(shape),
    )


# ---------------------------------------------------------------------------
# IRF-only evaluation


def _chain_effect(phi_col, phi_tilde, literals, j: int) -> float:
    """Effect through all paths visiting ``literals`` in order, ending at j."""
    if not literals:
        return float(phi_col[j - 1])
    val = float(phi_col[literals[0] - 1])
    prev = literals[0]
    for nxt in list(literals[1:]) + [j]:
        val *= phi_tilde[nxt - 1, prev - 1] / phi_tilde[prev - 1, prev - 1]
        prev = nxt
    return val


def effect_from_irfs(phi_col, phi_tilde, cond, xi: float = 1.0,
                     shock_label: str = "shock",
                     cap: int = TERM_CAP) -> EffectTable:
    """Transmission effects computed from IRFs alone.

    ``phi_col`` is the identified shock's structural IRF column on the
    full grid and ``phi_tilde`` the orthogonalised IRF matrix under the
    same ordering (a unit-diagonal ratio matrix works equally, since
    only ratios enter).  This is the route available when IRFs come from
    local projections and no coefficient matrices exist.

    The ratio ``phi_tilde[s, r] / phi_tilde[r, r]`` prices the unit
    effect of variable r on variable s only when orthogonalised
    innovations enter the system contemporaneously, as they do for VAR
    and local-projection grids; moving-average terms let innovations
    skip periods and break that reading, so use the edge-deletion route
    for models with MA components.

    Forbidden literals are priced by alternating sums over
    required-literal chains, so the cost grows with ``2**|forbidden|``
    per term; the ``cap`` bounds the total number of chain evaluations.
    """
    if not isinstance(cond, TransmissionCondition):
        raise TypeError("cond must be a parsed TransmissionCondition")
    phi_col = np.asarray(phi_col, dtype=float).reshape(-1)
    phi_tilde = np.asarray(phi_tilde, dtype=float)
    n = cond.size
    if phi_col.shape[0] != n or phi_tilde.shape != (n, n):
        raise DimensionMismatchError(
            f"IRF inputs do not match the condition grid of size {n}"
        )
    terms = expand_terms(cond, cap=cap)

    evaluations = 0
    total = xi * phi_col.copy()
    channel = np.zeros(n)
    for j in range(1, n + 1):
        acc = 0.0
        for term in terms:
            if any(k > j for k in term.required):
                continue
            if j in term.forbidden:
                continue
            req = tuple(k for k in term.required_sorted if k < j)
            forb = tuple(k for k in term.forbidden_sorted if k < j)
            evaluations += 2 ** len(forb)
            if evaluations > cap:
                raise UnsupportedConditionError(
                    f"IRF-route expansion exceeded {cap} chain evaluations"
                )
            for mask in range(2 ** len(forb)):
                extra = [forb[b] for b in range(len(forb)) if mask >> b & 1]
                sign = -1 if len(extra) % 2 else 1
                chain = tuple(sorted(set(req) | set(extra)))
                acc_term = _chain_effect(phi_col, phi_tilde, chain, j)
                acc += term.sign * sign * acc_term
        channel[j - 1] = acc

    shape = (cond.h + 1, cond.K)
    return EffectTable(
        shock_label=shock_label,
        condition=cond.source,
        labels=cond.labels or tuple(f"x{i+1}" for i in range(cond.K)),
        xi=xi,
        total=total.reshape(shape),
        channel=(xi * channel).reshape(shape),
        complement=(total - xi * channel).reshape(shape),
    )
