"""Exact finite-dimensional exterior and bigraded algebra.

Everything here is sparse and exact over complex coefficients: wedge
products with merge-permutation signs, Pfaffians of skew matrices whose
entries are even-degree forms, Berezin integrals (projection onto the top
exterior coefficient), nilpotent exponentials, derivation extensions of
endomorphisms to antisymmetric powers, and the alternating-trace
identities that drive the curvature cancellation machinery.

Sign conventions, fixed once:

* wedge sign = parity of the merge permutation of the two index lists;
* bigraded (Koszul) product  (w (x) s) * (w' (x) s') =
  (-1)^{deg s * deg w'} (w ^ w') (x) (s ^ s');
* a skew matrix M corresponds to the 2-vector  sum_{i<j} M[i,j] e_i ^ e_j,
  which makes  berezin(exp(two_vector(M))) == pfaffian(M)  hold exactly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "FormElement", "BigradedElement", "SkewFormMatrix",
    "wedge_sign", "merge_indices", "pfaffian", "pfaffian_definition",
    "pfaffian_numeric", "berezin", "berezin_fiber", "exp_nilpotent",
    "two_vector", "dp_extend", "dp_extend4", "supertrace",
    "patodi_coefficient", "killing_double_sum", "lambda_basis",
]

_COEFF_EPS = 0.0  # canonical form drops exact zeros only


def merge_indices(a, b):
    """Concatenate two strictly increasing index tuples.

    Returns (sign, merged) with the merge-permutation parity, or (0, None)
    when the tuples share an index.
    """
    if set(a) & set(b):
        return 0, None
    merged = a + b
    # parity of the permutation sorting `merged`
    inversions = 0
    for i, ai in enumerate(a):
        for bj in b:
            if ai > bj:
                inversions += 1
    return (-1) ** inversions, tuple(sorted(merged))


def wedge_sign(a, b):
    return merge_indices(a, b)[0]


class FormElement:
    """Element of the exterior algebra on `n` anticommuting generators.

    Stored as a map from strictly increasing index tuples to nonzero
    complex coefficients.
    """

    __slots__ = ("n", "terms")

    def __init__(self, n, terms=None):
        self.n = n
        self.terms = {}
        if terms:
            for idx, c in terms.items():
                idx = tuple(idx)
                if any(i < 0 or i >= n for i in idx):
                    raise ValueError(f"generator index out of range in {idx}")
                if list(idx) != sorted(set(idx)):
                    raise ValueError(f"index tuple must be strictly increasing: {idx}")
                if c != 0:
                    self.terms[idx] = self.terms.get(idx, 0) + c
            self._prune()

    def _prune(self):
        self.terms = {k: v for k, v in self.terms.items() if v != 0}

    @classmethod
    def scalar(cls, n, value=1.0):
        return cls(n, {(): value})

    @classmethod
    def generator(cls, n, i):
        return cls(n, {(i,): 1.0})

    def copy(self):
        out = FormElement(self.n)
        out.terms = dict(self.terms)
        return out

    def __add__(self, other):
        if isinstance(other, (int, float, complex)):
            other = FormElement.scalar(self.n, other)
        if self.n != other.n:
            raise ValueError("mismatched generator counts")
        out = FormElement(self.n)
        out.terms = dict(self.terms)
        for idx, c in other.terms.items():
            out.terms[idx] = out.terms.get(idx, 0) + c
        out._prune()
        return out

    __radd__ = __add__

    def __sub__(self, other):
        return self + (other * -1 if isinstance(other, FormElement) else -other)

    def __mul__(self, other):
        if isinstance(other, (int, float, complex)):
            out = FormElement(self.n)
            if other != 0:
                out.terms = {k: v * other for k, v in self.terms.items()}
            return out
        return wedge(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1

    def degree_part(self, k):
        out = FormElement(self.n)
        out.terms = {idx: c for idx, c in self.terms.items() if len(idx) == k}
        return out

    def degrees(self):
        return sorted({len(idx) for idx in self.terms})

    def coefficient(self, idx):
        return self.terms.get(tuple(idx), 0.0)

    def max_abs(self):
        return max((abs(c) for c in self.terms.values()), default=0.0)

    def is_zero(self):
        return not self.terms

    def __eq__(self, other):
        if not isinstance(other, FormElement):
            return NotImplemented
        return self.n == other.n and self.terms == other.terms

    def __repr__(self):
        if not self.terms:
            return "FormElement(0)"
        bits = [f"{c!r}*e{''.join(str(i + 1) for i in idx)}" if idx else f"{c!r}"
                for idx, c in sorted(self.terms.items(), key=lambda kv: (len(kv[0]), kv[0]))]
        return "FormElement(" + " + ".join(bits) + ")"


def wedge(a, b):
    """Graded-commutative product of two form elements."""
    if a.n != b.n:
        raise ValueError("mismatched generator counts")
    out = FormElement(a.n)
    terms = out.terms
    for ia, ca in a.terms.items():
        for ib, cb in b.terms.items():
            sign, merged = merge_indices(ia, ib)
            if sign:
                terms[merged] = terms.get(merged, 0) + sign * ca * cb
    out._prune()
    return out


class BigradedElement:
    """Element of Lambda(base) (x) Lambda(fiber) with the Koszul sign rule."""

    __slots__ = ("n_base", "n_fiber", "terms")

    def __init__(self, n_base, n_fiber, terms=None):
        self.n_base = n_base
        self.n_fiber = n_fiber
        self.terms = {}
        if terms:
            for (tb, tf), c in terms.items():
                if c != 0:
                    self.terms[(tuple(tb), tuple(tf))] = \
                        self.terms.get((tuple(tb), tuple(tf)), 0) + c
            self._prune()

    def _prune(self):
        self.terms = {k: v for k, v in self.terms.items() if v != 0}

    @classmethod
    def scalar(cls, n_base, n_fiber, value=1.0):
        return cls(n_base, n_fiber, {((), ()): value})

    def _check(self, other):
        if (self.n_base, self.n_fiber) != (other.n_base, other.n_fiber):
            raise ValueError("mismatched bigraded shapes")

    def __add__(self, other):
        if isinstance(other, (int, float, complex)):
            other = BigradedElement.scalar(self.n_base, self.n_fiber, other)
        self._check(other)
        out = BigradedElement(self.n_base, self.n_fiber)
        out.terms = dict(self.terms)
        for k, c in other.terms.items():
            out.terms[k] = out.terms.get(k, 0) + c
        out._prune()
        return out

    __radd__ = __add__

    def __sub__(self, other):
        return self + other * -1

    def __neg__(self):
        return self * -1

    def __mul__(self, other):
        if isinstance(other, (int, float, complex)):
            out = BigradedElement(self.n_base, self.n_fiber)
            if other != 0:
                out.terms = {k: v * other for k, v in self.terms.items()}
            return out
        self._check(other)
        out = BigradedElement(self.n_base, self.n_fiber)
        terms = out.terms
        for (ba, fa), ca in self.terms.items():
            for (bb, fb), cb in other.terms.items():
                koszul = -1 if (len(fa) % 2) and (len(bb) % 2) else 1
                sb, mb = merge_indices(ba, bb)
                if not sb:
                    continue
                sf, mf = merge_indices(fa, fb)
                if not sf:
                    continue
                key = (mb, mf)
                terms[key] = terms.get(key, 0) + koszul * sb * sf * ca * cb
        out._prune()
        return out

    __rmul__ = __mul__

    def coefficient(self, tb, tf):
        return self.terms.get((tuple(tb), tuple(tf)), 0.0)

    def max_abs(self):
        return max((abs(c) for c in self.terms.values()), default=0.0)

    def min_total_degree(self):
        return min((len(tb) + len(tf) for tb, tf in self.terms), default=0)

    def __repr__(self):
        return f"BigradedElement(nb={self.n_base}, nf={self.n_fiber}, {len(self.terms)} terms)"


@dataclass
class SkewFormMatrix:
    """d x d skew matrix of even-degree (hence commuting) form elements."""

    d: int
    entries: list = field(default_factory=list)

    def __post_init__(self):
        if self.d % 2:
            raise ValueError("dimension must be even")
        if len(self.entries) != self.d or any(len(row) != self.d for row in self.entries):
            raise ValueError("entries must be a d x d array of FormElements")
        for i in range(self.d):
            for j in range(self.d):
                e = self.entries[i][j]
                if any(deg % 2 for deg in e.degrees()):
                    raise ValueError("entries must have pure even degree")
                if (e + self.entries[j][i]).max_abs() != 0:
                    raise ValueError("matrix must be exactly skew-symmetric")

    @classmethod
    def from_scalars(cls, m):
        m = np.asarray(m)
        d = m.shape[0]
        ent = [[FormElement(1, {(): complex(m[i, j])} if m[i, j] != 0 else None)
                for j in range(d)] for i in range(d)]
        return cls(d, ent)


def _pfaffian_terms(entry, indices, memo):
    if not indices:
        return None  # scalar 1 handled by caller
    key = indices
    if key in memo:
        return memo[key]
    i0 = indices[0]
    rest = indices[1:]
    acc = None
    for pos, j in enumerate(rest):
        sub = tuple(k for k in rest if k != j)
        sign = (-1) ** pos
        factor = entry(i0, j)
        if sub:
            sub_pf = _pfaffian_terms(entry, sub, memo)
            term = wedge(factor, sub_pf)
        else:
            term = factor
        term = term * sign
        acc = term if acc is None else acc + term
    if acc is None:
        acc = FormElement(entry(i0, rest[0]).n)
    memo[key] = acc
    return acc


def pfaffian(a: SkewFormMatrix) -> FormElement:
    """Pfaffian by recursive first-row expansion, memoized on index subsets.

    Matches the permutation-sum definition (see pfaffian_definition);
    entries commute because they are of even degree.
    """
    if a.d % 2:
        raise ValueError("Pfaffian needs even dimension")
    return _pfaffian_terms(lambda i, j: a.entries[i][j], tuple(range(a.d)), {})


def pfaffian_definition(a: SkewFormMatrix) -> FormElement:
    """Permutation-sum Pfaffian 1/(2^{d/2} (d/2)!) sum_s sgn(s) prod a_{s(2i-1) s(2i)}.

    Exponential in d; retained as the independent test oracle for d <= 8.
    """
    d = a.d
    if d > 8:
        raise ValueError("definition oracle limited to d <= 8")
    half = d // 2
    total = FormElement(a.entries[0][0].n)
    for sigma in itertools.permutations(range(d)):
        sgn = _perm_sign(sigma)
        prod = a.entries[sigma[0]][sigma[1]]
        for i in range(1, half):
            prod = wedge(prod, a.entries[sigma[2 * i]][sigma[2 * i + 1]])
        total = total + prod * sgn
    return total * (1.0 / (2 ** half * math.factorial(half)))


def pfaffian_numeric(m) -> float:
    """Pfaffian of a plain scalar skew matrix."""
    pf = pfaffian(SkewFormMatrix.from_scalars(m))
    c = pf.coefficient(())
    return c.real if isinstance(c, complex) else float(c)


def _perm_sign(sigma):
    sign = 1
    seen = [False] * len(sigma)
    for i in range(len(sigma)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = sigma[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def berezin(omega: FormElement):
    """Coefficient of the top generator product e_1 ^ ... ^ e_n."""
    return omega.coefficient(tuple(range(omega.n)))


def berezin_fiber(omega: BigradedElement) -> FormElement:
    """Fiberwise Berezin integral: project onto top fiber degree, keep the base form."""
    top = tuple(range(omega.n_fiber))
    out = FormElement(omega.n_base)
    for (tb, tf), c in omega.terms.items():
        if tf == top:
            out.terms[tb] = out.terms.get(tb, 0) + c
    out._prune()
    return out


def _scalar_part(omega):
    if isinstance(omega, FormElement):
        return omega.coefficient(()), omega - FormElement.scalar(omega.n, omega.coefficient(()))
    s = omega.coefficient((), ())
    return s, omega - BigradedElement.scalar(omega.n_base, omega.n_fiber, s)


def exp_nilpotent(omega, max_degree=None):
    """exp of a form element; exact because the positive-degree part is nilpotent.

    A scalar part s is split off as exp(s) * exp(omega - s).
    """
    if isinstance(omega, FormElement):
        top = omega.n
        one = FormElement.scalar(omega.n, 1.0)
    else:
        top = omega.n_base + omega.n_fiber
        one = BigradedElement.scalar(omega.n_base, omega.n_fiber, 1.0)
    if max_degree is None:
        max_degree = top
    s, nil = _scalar_part(omega)
    min_deg = (nil.min_total_degree() if isinstance(nil, BigradedElement)
               else min(nil.degrees(), default=top + 1))
    if min_deg < 1:
        raise ValueError("positive-degree part expected after scalar split")
    kmax = max_degree // max(min_deg, 1)
    result = one
    power = one
    fact = 1.0
    for k in range(1, kmax + 1):
        power = power * nil
        fact *= k
        if (power.max_abs() if hasattr(power, "max_abs") else 0) == 0:
            break
        result = result + power * (1.0 / fact)
    scale = np.exp(complex(s)) if isinstance(s, complex) else math.exp(s)
    return result * scale


def two_vector(m, n=None) -> FormElement:
    """The 2-vector sum_{i<j} m[i,j] e_i ^ e_j of a skew matrix."""
    m = np.asarray(m)
    d = m.shape[0]
    n = n or d
    terms = {}
    for i in range(d):
        for j in range(i + 1, d):
            if m[i, j] != 0:
                terms[(i, j)] = complex(m[i, j])
    return FormElement(n, terms)


# --------------------------------------------------------------------------
# Derivation extensions and alternating traces
# --------------------------------------------------------------------------

def lambda_basis(d, p):
    """Lexicographically ordered basis index tuples of Lambda^p."""
    return list(itertools.combinations(range(d), p))


def dp_extend(a, p):
    """Derivation extension of an endomorphism to Lambda^p.

    Acts in one slot at a time with merge signs; D^0 = 0, D^1 = a.
    Matrix is on the lexicographic basis of index tuples.
    """
    a = np.asarray(a, dtype=float)
    d = a.shape[0]
    if not 0 <= p <= d:
        raise ValueError(f"degree p={p} out of range 0..{d}")
    basis = lambda_basis(d, p)
    pos = {idx: k for k, idx in enumerate(basis)}
    m = np.zeros((len(basis), len(basis)))
    for col, idx in enumerate(basis):
        for slot in range(p):
            i = idx[slot]
            others = idx[:slot] + idx[slot + 1:]
            for j in range(d):
                coeff = a[j, i]
                if coeff == 0.0 or j in others:
                    continue
                # e_j replaces slot `slot`: move it to the front (slot swaps),
                # then merge into the ordered remainder
                sign, merged = merge_indices((j,), others)
                m[pos[merged], col] += (-1) ** slot * sign * coeff
    return m


def dp_extend4(a, p):
    """Extension of a 4-tensor a^{ijkl} (e_i* (x) e_j (x) e_k* (x) e_l) to Lambda^p.

    Computed as sum_{ij} D^p(E_ij) o D^p(a[i,j,:,:]) where E_ij is the
    elementary endomorphism taking e_i to e_j; bilinearity in the two
    endomorphism slots makes this the induced linear map on 4-tensors.
    """
    a = np.asarray(a, dtype=float)
    d = a.shape[0]
    if a.shape != (d, d, d, d):
        raise ValueError("expected a d^4 tensor")
    if not 0 <= p <= d:
        raise ValueError(f"degree p={p} out of range 0..{d}")
    size = math.comb(d, p)
    out = np.zeros((size, size))
    for i in range(d):
        for j in range(d):
            # slice (k,l) is an operator in the same e_k* (x) e_l convention
            # as E_ij, so its operator matrix is the transposed array
            second = dp_extend(a[i, j].T, p)
            if not second.any():
                continue
            eij = np.zeros((d, d))
            eij[j, i] = 1.0  # e_i* (x) e_j maps e_i to e_j
            out += dp_extend(eij, p) @ second
    return out


def supertrace(ops, d):
    """Alternating sum over form degrees: sum_p (-1)^p tr ops(p)."""
    return sum((-1) ** p * float(np.trace(np.atleast_2d(ops(p)))) for p in range(d + 1))


def patodi_coefficient(mats):
    """Coefficient of x_1...x_d in det(x_1 A_1 + ... + x_d A_d).

    Extracted by evaluating the determinant on all of {0,1}^d and
    Moebius-inverting: only the full-support multilinear monomial survives
    the alternating subset sum.
    """
    mats = [np.asarray(m, dtype=float) for m in mats]
    d = len(mats)
    if any(m.shape != (d, d) for m in mats):
        raise ValueError("need exactly d matrices of size d x d")
    total = 0.0
    for mask in range(2 ** d):
        chosen = [mats[i] for i in range(d) if mask >> i & 1]
        size = len(chosen)
        det = np.linalg.det(sum(chosen)) if chosen else 0.0
        total += (-1) ** (d - size) * det
    return total


def killing_double_sum(a, pairing="interleaved"):
    """Double permutation contraction of a 4-tensor.

    pairing="interleaved": sum over s1, s2 of
        sgn(s1) sgn(s2) prod_m a[s1(2m-1), s2(2m-1), s1(2m), s2(2m)]
    which equals the supertrace of (dp_extend4(a, .))^{d/2}.

    pairing="blocks": slots (1,2) from s1 and (3,4) from s2,
        sgn(s1) sgn(s2) prod_m a[s1(2m-1), s1(2m), s2(2m-1), s2(2m)]
    the contraction used for curvature tensors, where the two index pairs
    are the antisymmetric pairs.  The two pairings agree after swapping
    tensor slots 2 and 3.
    """
    a = np.asarray(a, dtype=float)
    d = a.shape[0]
    if d % 2:
        raise ValueError("even dimension required")
    if pairing == "blocks":
        return killing_double_sum(a.transpose(0, 2, 1, 3), "interleaved")
    if pairing != "interleaved":
        raise ValueError("pairing must be 'interleaved' or 'blocks'")
    half = d // 2
    total = 0.0
    perms = list(itertools.permutations(range(d)))
    signs = {sigma: _perm_sign(sigma) for sigma in perms}
    for s1 in perms:
        for s2 in perms:
            prod = 1.0
            for m in range(half):
                prod *= a[s1[2 * m], s2[2 * m], s1[2 * m + 1], s2[2 * m + 1]]
                if prod == 0.0:
                    break
            if prod:
                total += signs[s1] * signs[s2] * prod
    return total
