"""Boolean 2-CSP instances and their encoding as symmetric matrices.

Variables are numbered 1..n; index 0 is the homogenising coordinate, fixed
to *true*.  A cut set ``U`` (always containing 0) encodes the assignment
``x_i = (i in U)``, and its sign vector is ``s_U = 2 * 1_U - 1``.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class InstanceError(ValueError):
    """Malformed or out-of-range instance data."""


# -- templates -----------------------------------------------------------

OPS = ("and", "or", "xor", "implies", "lit")


@dataclass(frozen=True)
class PredicateTemplate:
    """Truth table of a binary predicate, indexed by ``2*x_i + x_j``."""

    truth_table: tuple[bool, bool, bool, bool]

    def __post_init__(self):
        table = tuple(bool(v) for v in self.truth_table)
        if len(table) != 4:
            raise InstanceError("a truth table has exactly four cells")
        if not any(table):
            raise InstanceError("the constant false predicate is not allowed")
        object.__setattr__(self, "truth_table", table)

    def __call__(self, xi: bool, xj: bool) -> bool:
        return self.truth_table[2 * int(bool(xi)) + int(bool(xj))]

    @classmethod
    def from_op(cls, op: str, neg_i: bool = False, neg_j: bool = False) -> "PredicateTemplate":
        if op not in OPS:
            raise InstanceError(f"unknown op {op!r}; expected one of {OPS}")
        cells = []
        for xi, xj in itertools.product((False, True), repeat=2):
            a, b = xi != neg_i, xj != neg_j
            cells.append({
                "and": a and b,
                "or": a or b,
                "xor": a != b,
                "implies": (not a) or b,
                "lit": a,
            }[op])
        return cls(tuple(cells))


XOR = PredicateTemplate.from_op("xor")
DICUT = PredicateTemplate.from_op("and", neg_j=True)


@dataclass(frozen=True)
class Constraint:
    template: PredicateTemplate
    i: int
    j: int

    def check(self, n: int) -> None:
        if not (1 <= self.i <= n and 1 <= self.j <= n):
            raise InstanceError(f"constraint indices ({self.i}, {self.j}) outside [1, {n}]")
        if self.i == self.j and not (self.template.truth_table[0] or self.template.truth_table[3]):
            # only the (F,F) and (T,T) cells can occur on the diagonal
            raise InstanceError(f"constraint on ({self.i}, {self.i}) can never be satisfied")


@dataclass(frozen=True)
class CutSet:
    """Canonical cut: a subset of {0, ..., m-1} that contains 0, stored as a bitmask."""

    mask: int
    m: int

    def __post_init__(self):
        if self.m < 1 or self.m > 62:
            raise InstanceError(f"cut dimension {self.m} outside [1, 62]")
        full = (1 << self.m) - 1
        mask = int(self.mask) & full
        if not mask & 1:
            mask ^= full
        object.__setattr__(self, "mask", mask)

    @classmethod
    def from_members(cls, members: Iterable[int], m: int) -> "CutSet":
        mask = 0
        for i in members:
            if not 0 <= i < m:
                raise InstanceError(f"member {i} outside [0, {m})")
            mask |= 1 << i
        return cls(mask, m)

    @classmethod
    def from_assignment(cls, bits: Sequence[bool]) -> "CutSet":
        return cls.from_members([0] + [i + 1 for i, b in enumerate(bits) if b], len(bits) + 1)

    @property
    def members(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.m) if (self.mask >> i) & 1)

    def assignment(self) -> tuple[bool, ...]:
        return tuple(bool((self.mask >> i) & 1) for i in range(1, self.m))

    def sign_vector(self) -> np.ndarray:
        return np.array([1.0 if (self.mask >> i) & 1 else -1.0 for i in range(self.m)])

    def __lt__(self, other: "CutSet") -> bool:
        return self.members < other.members


@dataclass
class CspInstance:
    n: int
    constraints: list[Constraint]
    weights: np.ndarray
    kind: str = "csp"
    _arrays: tuple | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if self.n < 1:
            raise InstanceError("an instance needs at least one variable")
        if not self.constraints:
            raise InstanceError("an instance needs at least one constraint")
        if len(self.weights) != len(self.constraints):
            raise InstanceError("one weight per constraint is required")
        bad = np.flatnonzero(~(self.weights >= 0) | ~np.isfinite(self.weights))
        if bad.size:
            k = int(bad[0])
            raise InstanceError(f"constraint {k}: weight {self.weights[k]!r} must be finite and >= 0")
        for c in self.constraints:
            c.check(self.n)

    @property
    def d(self) -> int:
        return len(self.constraints)

    @property
    def m(self) -> int:
        return self.n + 1

    def arrays(self):
        """(ci, cj, tables) arrays consumed by the counting kernels."""
        if self._arrays is None:
            ci = np.array([c.i for c in self.constraints], dtype=np.int64)
            cj = np.array([c.j for c in self.constraints], dtype=np.int64)
            tables = np.array([c.template.truth_table for c in self.constraints], dtype=np.int8)
            self._arrays = (ci, cj, tables)
        return self._arrays

    def with_weights(self, weights) -> "CspInstance":
        return CspInstance(self.n, list(self.constraints), np.asarray(weights, dtype=float), self.kind)

    def value(self, bits: Sequence[bool]) -> float:
        return float(sum(w for c, w in zip(self.constraints, self.weights) if satisfied(c, bits)))


# -- matrices ------------------------------------------------------------

def _sign(s) -> int:
    if s in (1, "+", True):
        return 1
    if s in (-1, "-", False):
        return -1
    raise InstanceError(f"sign must be '+' or '-', got {s!r}")


def delta_matrix(sign_i, i: int, sign_j, j: int, n: int) -> np.ndarray:
    """Delta_{+-i,+-j} = sym((e_0 + s_i e_i)(e_0 + s_j e_j)^T) of order n + 1."""
    if not (1 <= i <= n and 1 <= j <= n):
        raise InstanceError(f"indices ({i}, {j}) outside [1, {n}]")
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    u[0] += 1.0
    v[0] += 1.0
    u[i] += _sign(sign_i)
    v[j] += _sign(sign_j)
    return 0.5 * (np.outer(u, v) + np.outer(v, u))


def constraint_matrix(c: Constraint, n: int) -> np.ndarray:
    """A_c with <A_c, S_U> = 1 if U's assignment satisfies c and 0 otherwise."""
    c.check(n)
    A = np.zeros((n + 1, n + 1))
    for xi, xj in itertools.product((False, True), repeat=2):
        if c.template(xi, xj):
            A += delta_matrix(1 if xi else -1, c.i, 1 if xj else -1, c.j, n)
    return 0.25 * A


def satisfied(c: Constraint, bits: Sequence[bool]) -> bool:
    """Truth-table lookup; ``bits[k]`` is the value of variable k + 1."""
    return c.template(bits[c.i - 1], bits[c.j - 1])


def triangle_family(n: int) -> list[tuple[int, int, int, int]]:
    """Distinct (sign_i, i, sign_j, j) of the Delta family on n variables.

    Four per pair i < j and three per diagonal index (the two mixed-sign
    diagonal matrices coincide).
    """
    fam = []
    for i in range(1, n + 1):
        for j in range(i, n + 1):
            for si, sj in ((-1, -1), (-1, 1), (1, -1), (1, 1)):
                if i == j and (si, sj) == (1, -1):
                    continue
                fam.append((si, i, sj, j))
    return fam


# -- encodings -----------------------------------------------------------

_DEFAULT_OP = {"maxcut": "xor", "maxdicut": "and", "max2sat": "or", "csp": None}


def _item_constraint(kind: str, item: dict, where: str) -> tuple[Constraint, float]:
    try:
        i = int(item["i"])
        j = int(item.get("j", i))
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceError(f"{where}: needs integer fields 'i' and 'j'") from exc
    op = item.get("op", _DEFAULT_OP[kind])
    if op is None:
        raise InstanceError(f"{where}: 'op' is required for kind 'csp'")
    neg_i = bool(item.get("neg_i", False))
    neg_j = bool(item.get("neg_j", kind == "maxdicut" and "neg_j" not in item))
    if kind == "maxcut" and op != "xor":
        raise InstanceError(f"{where}: maxcut items must use op 'xor'")
    if kind == "maxdicut" and (op != "and" or neg_i or not neg_j):
        raise InstanceError(f"{where}: maxdicut items are arcs x_i and not x_j")
    if kind == "max2sat" and op != "or":
        raise InstanceError(f"{where}: max2sat items must use op 'or'")
    raw_w = item.get("weight", 1.0)
    try:
        w = float(raw_w)
    except (TypeError, ValueError) as exc:
        raise InstanceError(f"{where}: weight {raw_w!r} is not a number") from exc
    if not np.isfinite(w) or w < 0:
        raise InstanceError(f"{where}: weight {raw_w!r} must be finite and >= 0")
    try:
        template = PredicateTemplate.from_op(op, neg_i, neg_j)
    except InstanceError as exc:
        raise InstanceError(f"{where}: {exc}") from exc
    return Constraint(template, i, j), w


def encode_problem(kind: str, raw: Iterable, n: int) -> CspInstance:
    """Build a CspInstance from edges/arcs/clauses.

    ``raw`` items are either dicts in the instance-JSON item form or, for
    maxcut/maxdicut, ``(i, j, weight)`` triples; max2sat also accepts
    ``(i, neg_i, j, neg_j, weight)``.
    """
    if kind not in _DEFAULT_OP:
        raise InstanceError(f"unknown kind {kind!r}")
    constraints, weights = [], []
    for k, item in enumerate(raw):
        where = f"item {k}"
        if not isinstance(item, dict):
            item = tuple(item)
            if kind in ("maxcut", "maxdicut") and len(item) in (2, 3):
                item = {"i": item[0], "j": item[1], "weight": item[2] if len(item) == 3 else 1.0}
            elif kind == "max2sat" and len(item) == 5:
                item = {"i": item[0], "neg_i": item[1], "j": item[2], "neg_j": item[3],
                        "weight": item[4]}
            else:
                raise InstanceError(f"{where}: cannot interpret {item!r} for kind {kind}")
        c, w = _item_constraint(kind, item, where)
        try:
            c.check(n)
        except InstanceError as exc:
            raise InstanceError(f"{where}: {exc}") from exc
        constraints.append(c)
        weights.append(w)
    return CspInstance(n, constraints, np.array(weights), kind)


def parse_instance(path, fmt: str | None = None, kind: str | None = None) -> CspInstance:
    """Read an instance file.

    ``fmt`` is 'json' or 'edgelist' (default: by extension).  Edge lists hold
    ``i j w`` lines with 1-based vertices; a ``# kind: <kind>`` comment or the
    ``kind`` argument selects the problem (maxcut by default).
    """
    path = Path(path)
    if fmt is None:
        fmt = "json" if path.suffix.lower() == ".json" else "edgelist"
    try:
        text = path.read_text()
    except OSError as exc:
        raise InstanceError(f"{path}: {exc.strerror}") from exc
    if fmt == "json":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InstanceError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
        if not isinstance(doc, dict):
            raise InstanceError(f"{path}: top level must be an object")
        k = kind or doc.get("kind", "csp")
        if "n" not in doc or "items" not in doc:
            raise InstanceError(f"{path}: fields 'n' and 'items' are required")
        try:
            n = int(doc["n"])
        except (TypeError, ValueError) as exc:
            raise InstanceError(f"{path}: field 'n' must be an integer") from exc
        try:
            return encode_problem(k, doc["items"], n)
        except InstanceError as exc:
            raise InstanceError(f"{path}: {exc}") from exc
    if fmt != "edgelist":
        raise InstanceError(f"unknown input format {fmt!r}")
    k = kind
    items = []
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.strip()
        if body.startswith("#"):
            tag = body.lstrip("#").strip()
            if tag.lower().startswith("kind:") and k is None:
                k = tag.split(":", 1)[1].strip()
            continue
        if not body:
            continue
        parts = body.split()
        if len(parts) not in (2, 3):
            raise InstanceError(f"{path}: line {lineno}: expected 'i j [w]'")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise InstanceError(f"{path}: line {lineno}: vertex ids must be integers") from exc
        try:
            w = float(parts[2]) if len(parts) == 3 else 1.0
        except ValueError as exc:
            raise InstanceError(f"{path}: line {lineno}: weight {parts[2]!r} is not a number") from exc
        if not np.isfinite(w) or w < 0:
            raise InstanceError(f"{path}: line {lineno}: weight {parts[2]!r} must be >= 0")
        items.append((i, j, w))
    k = k or "maxcut"
    if k not in ("maxcut", "maxdicut"):
        raise InstanceError(f"{path}: edge lists encode maxcut or maxdicut, not {k!r}")
    if not items:
        raise InstanceError(f"{path}: no edges")
    n = max(max(i, j) for i, j, _ in items)
    try:
        return encode_problem(k, items, n)
    except InstanceError as exc:
        raise InstanceError(f"{path}: {exc}") from exc


def instance_to_json(inst: CspInstance) -> dict:
    items = []
    for c, w in zip(inst.constraints, inst.weights):
        items.append({"i": c.i, "j": c.j, "table": [int(v) for v in c.template.truth_table],
                      "weight": float(w)})
    return {"kind": inst.kind, "n": inst.n, "items": items}


def random_instance(kind: str, n: int, rng: np.random.Generator, density: float = 0.5,
                    wmin: float = 0.1, wmax: float = 1.0) -> CspInstance:
    """Random weighted maxcut / maxdicut / max2sat instance (at least one item)."""
    items = []
    pairs = [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)]
    for i, j in pairs:
        if rng.random() >= density:
            continue
        w = float(rng.uniform(wmin, wmax))
        if kind == "maxcut":
            items.append({"i": i, "j": j, "weight": w})
        elif kind == "maxdicut":
            u, v = (i, j) if rng.random() < 0.5 else (j, i)
            items.append({"i": u, "j": v, "weight": w})
        elif kind == "max2sat":
            items.append({"i": i, "j": j, "neg_i": bool(rng.random() < 0.5),
                          "neg_j": bool(rng.random() < 0.5), "weight": w})
        else:
            raise InstanceError(f"no random generator for kind {kind!r}")
    if not items:
        i, j = pairs[int(rng.integers(len(pairs)))]
        return random_instance(kind, n, rng, 1.0, wmin, wmax) if n > 1 else encode_problem(kind, [], n)
    return encode_problem(kind, items, n)
