"""Point-symmetry generators: exact coefficients, finite flows, brackets.

A generator is a vector field xi^t d_t + xi^x d_x + xi^y d_y + eta^i d_psi_i.
Coefficients live in a small exact term algebra: monomials in (t, x, y, psi_i)
times formal derivatives of named arbitrary time functions, with Fraction
coefficients.  The builtin tables fit in the closed family

    {c, c*t, c*x, c*y, c*(x^2+y^2), c*t*x, c*t*y, u(t), x*u'(t), y*u'(t), c*psi_i}

and brackets of builtins are computed exactly by symbolic differentiation.
Each builtin also carries its closed-form finite flow, used to transform
discrete or analytic solutions and verify invariance numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .models import MODEL_I, MODEL_II, MODEL_III, pde_residual_frames
from .solutions import AnalyticSolution, SampledSolution, sample_frames

SLOTS = ("t", "x", "y", "psi1", "psi2", "psi3")


def mono(pt=0, px=0, py=0, psis=(0, 0, 0), ufs=()):
    """Monomial key: t^pt x^px y^py psi_i^psis[i] * prod u^(k) factors."""
    return (pt, px, py, tuple(psis), tuple(sorted(ufs)))


def c_const(v):
    v = Fraction(v) if not isinstance(v, Fraction) else v
    return {} if v == 0 else {mono(): v}


def c_term(v, **kw):
    v = Fraction(v) if not isinstance(v, Fraction) else v
    return {} if v == 0 else {mono(**kw): v}


def c_add(*cs):
    out = {}
    for c in cs:
        for k, v in c.items():
            w = out.get(k, 0) + v
            if w == 0:
                out.pop(k, None)
            else:
                out[k] = w
    return out


def c_scale(c, s):
    if s == 0:
        return {}
    s = Fraction(s) if not isinstance(s, Fraction) else s
    return {k: v * s for k, v in c.items()}


def c_mul(a, b):
    out = {}
    for ka, va in a.items():
        for kb, vb in b.items():
            pt = ka[0] + kb[0]
            px = ka[1] + kb[1]
            py = ka[2] + kb[2]
            ps = tuple(p + q for p, q in zip(ka[3], kb[3]))
            ufs = tuple(sorted(ka[4] + kb[4]))
            k = (pt, px, py, ps, ufs)
            w = out.get(k, 0) + va * vb
            if w == 0:
                out.pop(k, None)
            else:
                out[k] = w
    return out


def c_diff(c, var):
    """Exact partial derivative of a coefficient with respect to a slot."""
    out = {}

    def put(key, val):
        if val == 0:
            return
        w = out.get(key, 0) + val
        if w == 0:
            out.pop(key, None)
        else:
            out[key] = w

    for (pt, px, py, ps, ufs), v in c.items():
        if var == "t":
            if pt > 0:
                put((pt - 1, px, py, ps, ufs), v * pt)
            # product rule over the arbitrary-function factors
            seen = set()
            for i, (name, k) in enumerate(ufs):
                if (name, k) in seen:
                    continue
                seen.add((name, k))
                mult = ufs.count((name, k))
                bumped = list(ufs)
                bumped[i] = (name, k + 1)
                put((pt, px, py, ps, tuple(sorted(bumped))), v * mult)
        elif var == "x":
            if px > 0:
                put((pt, px - 1, py, ps, ufs), v * px)
        elif var == "y":
            if py > 0:
                put((pt, px, py - 1, ps, ufs), v * py)
        else:
            i = ("psi1", "psi2", "psi3").index(var)
            if ps[i] > 0:
                q = list(ps)
                q[i] -= 1
                put((pt, px, py, tuple(q), ufs), v * ps[i])
    return out


def c_eval(c, t, x, y, psis=(), ufuncs=None):
    """Numeric evaluation; arbitrary functions need (f, f') pairs in ufuncs."""
    total = 0.0
    for (pt, px, py, ps, ufs), v in c.items():
        term = float(v)
        if pt:
            term = term * t**pt
        if px:
            term = term * np.asarray(x) ** px
        if py:
            term = term * np.asarray(y) ** py
        for i, p in enumerate(ps):
            if p:
                term = term * np.asarray(psis[i]) ** p
        for name, k in ufs:
            pair = (ufuncs or {}).get(name)
            if pair is None:
                raise ValueError(f"no evaluator for arbitrary function {name!r}")
            if k >= len(pair):
                raise ValueError(
                    f"derivative order {k} of {name!r} is not available"
                )
            term = term * pair[k](t)
        total = total + term
    return total


def c_repr(c):
    """Human-readable rendering, for irreducible-bracket reports."""
    if not c:
        return "0"
    parts = []
    for (pt, px, py, ps, ufs), v in sorted(c.items()):
        bits = [] if v == 1 else [str(v)]
        for sym, p in (("t", pt), ("x", px), ("y", py)):
            if p:
                bits.append(sym if p == 1 else f"{sym}^{p}")
        for i, p in enumerate(ps):
            if p:
                s = f"psi{i + 1}"
                bits.append(s if p == 1 else f"{s}^{p}")
        for name, k in ufs:
            bits.append(name + "'" * k)
        parts.append("*".join(bits) if bits else str(v))
    return " + ".join(parts)


# ----------------------------------------------------------------- generators


@dataclass(frozen=True)
class GeneratorSpec:
    """A point-symmetry generator with exact coefficients and optional flow.

    flow(eps, t, x, y, psis) -> (t', x', y', psis') is the finite group map;
    ufuncs maps arbitrary-function names to (f, f') callables.
    """

    name: str
    model: str
    nlayers: int
    xi_t: dict
    xi_x: dict
    xi_y: dict
    eta: tuple
    flow: object = None
    ufuncs: dict = field(default_factory=dict)

    def coeff(self, slot):
        if slot == "t":
            return self.xi_t
        if slot == "x":
            return self.xi_x
        if slot == "y":
            return self.xi_y
        i = ("psi1", "psi2", "psi3").index(slot)
        return self.eta[i] if i < len(self.eta) else {}

    def slots(self):
        return SLOTS[: 3 + self.nlayers]

    def infinitesimals(self, t, x, y, psis):
        """(xi_t, xi_x, xi_y, eta_i) evaluated at a point."""
        args = dict(t=t, x=x, y=y, psis=psis, ufuncs=self.ufuncs)
        out = [c_eval(self.coeff(s), **args) for s in self.slots()]
        return out[0], out[1], out[2], out[3:]

    def apply_to(self, coeff, ufuncs):
        """The vector field applied to a coefficient (exact)."""
        acc = {}
        for slot in self.slots():
            xi = self.coeff(slot)
            if xi:
                acc = c_add(acc, c_mul(xi, c_diff(coeff, slot)))
        return acc


FAMILY_KEYS = {
    mono(),
    mono(pt=1),
    mono(px=1),
    mono(py=1),
    mono(pt=1, px=1),
    mono(pt=1, py=1),
    mono(psis=(1, 0, 0)),
    mono(psis=(0, 1, 0)),
    mono(psis=(0, 0, 1)),
}


def in_family(gen: GeneratorSpec) -> bool:
    """Membership of every coefficient in the closed builtin family."""
    for slot in gen.slots():
        c = gen.coeff(slot)
        quad = {}
        for key, v in c.items():
            pt, px, py, ps, ufs = key
            if ufs:
                if (pt, ps) != (0, (0, 0, 0)) or len(ufs) != 1:
                    return False
                (name, k) = ufs[0]
                if k == 0 and (px, py) == (0, 0):
                    continue
                if k == 1 and (px, py) in ((1, 0), (0, 1)):
                    continue
                return False
            if key in FAMILY_KEYS:
                continue
            if key in (mono(px=2), mono(py=2)):
                quad[key] = v
                continue
            return False
        if quad and quad.get(mono(px=2)) != quad.get(mono(py=2)):
            return False  # x^2 and y^2 only as c*(x^2 + y^2)
    return True


def _flow_translate(slot):
    def flow(eps, t, x, y, psis):
        if slot == "t":
            return t + eps, x, y, psis
        if slot == "x":
            return t, x + eps, y, psis
        return t, x, y + eps, psis

    return flow


def _flow_shift(layer, nlayers, ufunc=None):
    def flow(eps, t, x, y, psis):
        out = list(psis)
        amount = eps if ufunc is None else eps * ufunc(t)
        for i in range(nlayers):
            if layer is None or i == layer:
                out[i] = out[i] + amount
        return t, x, y, tuple(out)

    return flow


def _flow_rotation(eps, t, x, y, psis):
    c, s = math.cos(eps), math.sin(eps)
    return t, c * x + s * y, -s * x + c * y, psis


def _flow_scaling(eps, t, x, y, psis):
    f = math.exp(-eps)
    return math.exp(eps) * t, x, y, tuple(f * p for p in psis)


def _flow_boost(axis, f, df):
    def flow(eps, t, x, y, psis):
        b, db = f(t), df(t)
        if axis == "x":
            return t, x + eps * b, y, tuple(p - eps * y * db for p in psis)
        return t, x, y + eps * b, tuple(p + eps * x * db for p in psis)

    return flow


def _flow_rotating_frame(eps, t, x, y, psis):
    th = eps * t
    c, s = math.cos(th), math.sin(th)
    r2 = x * x + y * y
    return t, c * x + s * y, -s * x + c * y, tuple(p - 0.5 * eps * r2 for p in psis)


def _const_one(t):
    return 1.0 + 0.0 * np.asarray(t, dtype=float)


def _const_zero(t):
    return 0.0 * np.asarray(t, dtype=float)


DEFAULT_UFUNC = (_const_one, _const_zero)


def builtin_generators(model, ufuncs=None):
    """The builtin generator basis of a model: 7 (I), 8 (II), or 5 (III).

    ufuncs optionally supplies (f, f') pairs for the arbitrary time functions
    ("a", "b", "c" for the simplified two-layer model, "f" for the ocean
    model); they default to the constant function 1.
    """
    supplied = ufuncs or {}

    def uf(name):
        return supplied.get(name, DEFAULT_UFUNC)

    if model == MODEL_I:
        nl = 2
        zero = {}
        gens = [
            GeneratorSpec("x-translation", model, nl, zero, c_const(1), zero,
                          ({}, {}), _flow_translate("x")),
            GeneratorSpec("y-translation", model, nl, zero, zero, c_const(1),
                          ({}, {}), _flow_translate("y")),
            GeneratorSpec("time-translation", model, nl, c_const(1), zero, zero,
                          ({}, {}), _flow_translate("t")),
            GeneratorSpec("psi1-shift", model, nl, zero, zero, zero,
                          (c_const(1), {}), _flow_shift(0, nl)),
            GeneratorSpec("psi2-shift", model, nl, zero, zero, zero,
                          ({}, c_const(1)), _flow_shift(1, nl)),
            GeneratorSpec("rotation", model, nl, zero, c_term(1, py=1),
                          c_term(-1, px=1), ({}, {}), _flow_rotation),
            GeneratorSpec("time-scaling", model, nl, c_term(1, pt=1), zero, zero,
                          (c_term(-1, psis=(1, 0, 0)), c_term(-1, psis=(0, 1, 0))),
                          _flow_scaling),
        ]
        return gens

    if model == MODEL_II:
        nl = 2
        zero = {}
        a, b, c = uf("a"), uf("b"), uf("c")
        g5 = GeneratorSpec(
            "gauge(a)", model, nl, zero, zero, zero,
            (c_term(1, ufs=(("a", 0),)), c_term(1, ufs=(("a", 0),))),
            _flow_shift(None, nl, ufunc=a[0]), {"a": a},
        )
        g6 = GeneratorSpec(
            "x-boost(b)", model, nl, zero, c_term(1, ufs=(("b", 0),)), zero,
            (c_term(-1, py=1, ufs=(("b", 1),)), c_term(-1, py=1, ufs=(("b", 1),))),
            _flow_boost("x", b[0], b[1]), {"b": b},
        )
        g7 = GeneratorSpec(
            "y-boost(c)", model, nl, zero, zero, c_term(1, ufs=(("c", 0),)),
            (c_term(1, px=1, ufs=(("c", 1),)), c_term(1, px=1, ufs=(("c", 1),))),
            _flow_boost("y", c[0], c[1]), {"c": c},
        )
        r2 = c_add(c_term(Fraction(-1, 2), px=2), c_term(Fraction(-1, 2), py=2))
        g8 = GeneratorSpec(
            "rotating-frame", model, nl, zero, c_term(1, pt=1, py=1),
            c_term(-1, pt=1, px=1), (r2, r2), _flow_rotating_frame,
        )
        return [
            GeneratorSpec("time-translation", model, nl, c_const(1), zero, zero,
                          ({}, {}), _flow_translate("t")),
            GeneratorSpec("psi2-shift", model, nl, zero, zero, zero,
                          ({}, c_const(1)), _flow_shift(1, nl)),
            GeneratorSpec("rotation", model, nl, zero, c_term(1, py=1),
                          c_term(-1, px=1), ({}, {}), _flow_rotation),
            GeneratorSpec("time-scaling", model, nl, c_term(1, pt=1), zero, zero,
                          (c_term(-1, psis=(1, 0, 0)), c_term(-1, psis=(0, 1, 0))),
                          _flow_scaling),
            g5, g6, g7, g8,
        ]

    if model == MODEL_III:
        nl = 3
        zero = {}
        f = uf("f")
        eta_f = tuple(c_term(1, ufs=(("f", 0),)) for _ in range(nl))
        return [
            GeneratorSpec("time-translation", model, nl, c_const(1), zero, zero,
                          ({}, {}, {}), _flow_translate("t")),
            GeneratorSpec("x-translation", model, nl, zero, c_const(1), zero,
                          ({}, {}, {}), _flow_translate("x")),
            GeneratorSpec("psi2-shift", model, nl, zero, zero, zero,
                          ({}, c_const(1), {}), _flow_shift(1, nl)),
            GeneratorSpec("psi3-shift", model, nl, zero, zero, zero,
                          ({}, {}, c_const(1)), _flow_shift(2, nl)),
            GeneratorSpec("gauge(f)", model, nl, zero, zero, zero, eta_f,
                          _flow_shift(None, nl, ufunc=f[0]), {"f": f}),
        ]

    raise ValueError(f"unknown model {model!r}")


def nonsymmetry_control(model=MODEL_II, nlayers=2):
    """The deliberate non-symmetry gauge map psi1 += eps*t*x*y (negative control)."""

    def flow(eps, t, x, y, psis):
        out = list(psis)
        out[0] = out[0] + eps * t * x * y
        return t, x, y, tuple(out)

    eta = tuple(c_term(1, pt=1, px=1, py=1) if i == 0 else {} for i in range(nlayers))
    return GeneratorSpec("nonsymmetry(x*y*t)", model, nlayers, {}, {}, {}, eta, flow)


def flow_consistency_defect(gen: GeneratorSpec, points, eps=1e-6):
    """Max mismatch between (flow(eps) - id)/eps-type differences and (xi, eta).

    Central difference in eps; the builtin flows sit at ~1e-10.
    """
    worst = 0.0
    for (t, x, y, psis) in points:
        plus = gen.flow(eps, t, x, y, psis)
        minus = gen.flow(-eps, t, x, y, psis)
        fd = [
            (plus[0] - minus[0]) / (2 * eps),
            (plus[1] - minus[1]) / (2 * eps),
            (plus[2] - minus[2]) / (2 * eps),
        ] + [(p - m) / (2 * eps) for p, m in zip(plus[3], minus[3])]
        xt, xx, xy, etas = gen.infinitesimals(t, x, y, psis)
        exact = [xt, xx, xy, *etas]
        worst = max(worst, max(abs(a - b) for a, b in zip(fd, exact)))
    return worst


# ------------------------------------------------------------------- brackets


def lie_bracket(g1: GeneratorSpec, g2: GeneratorSpec) -> GeneratorSpec:
    """[g1, g2], computed exactly in the term algebra (no flow attached)."""
    if g1.model != g2.model:
        raise ValueError("generators belong to different models")
    ufuncs = {**g1.ufuncs, **g2.ufuncs}
    coeffs = {}
    for slot in g1.slots():
        coeffs[slot] = c_add(
            g1.apply_to(g2.coeff(slot), ufuncs),
            c_scale(g2.apply_to(g1.coeff(slot), ufuncs), -1),
        )
    nl = g1.nlayers
    return GeneratorSpec(
        f"[{g1.name},{g2.name}]", g1.model, nl,
        coeffs["t"], coeffs["x"], coeffs["y"],
        tuple(coeffs[f"psi{i + 1}"] for i in range(nl)),
        None, ufuncs,
    )


def _solve_exact(rows, rhs, ncols):
    """Exact Gaussian elimination for A c = b over Fractions.

    Returns the solution vector or None if inconsistent.  Free columns are
    set to zero.
    """
    M = [list(r) + [v] for r, v in zip(rows, rhs)]
    nrows = len(M)
    pivots = []
    r = 0
    for col in range(ncols):
        piv = next((i for i in range(r, nrows) if M[i][col] != 0), None)
        if piv is None:
            continue
        M[r], M[piv] = M[piv], M[r]
        inv = Fraction(1, 1) / M[r][col]
        M[r] = [v * inv for v in M[r]]
        for i in range(nrows):
            if i != r and M[i][col] != 0:
                f = M[i][col]
                M[i] = [a - f * b for a, b in zip(M[i], M[r])]
        pivots.append(col)
        r += 1
        if r == nrows:
            break
    for i in range(r, nrows):
        if M[i][ncols] != 0:
            return None
    sol = [Fraction(0)] * ncols
    for i, col in enumerate(pivots):
        sol[col] = M[i][ncols]
    return sol


def match_to_basis(gen: GeneratorSpec, basis):
    """Express gen = sum c_k basis_k exactly; None if not representable."""
    keys = []
    seen = set()
    for g in [gen, *basis]:
        for slot in gen.slots():
            for key in g.coeff(slot):
                if (slot, key) not in seen:
                    seen.add((slot, key))
                    keys.append((slot, key))
    rows = []
    rhs = []
    for slot, key in keys:
        rows.append([Fraction(b.coeff(slot).get(key, 0)) for b in basis])
        rhs.append(Fraction(gen.coeff(slot).get(key, 0)))
    return _solve_exact(rows, rhs, len(basis))


@dataclass
class BracketTable:
    """Structure constants over a generator basis: [g_i, g_j] = sum_k c^k_ij g_k.

    constants maps (i, j) with i < j to {k: Fraction}; irreducible lists the
    pairs whose bracket left the basis span, with rendered coefficients.
    """

    names: tuple
    constants: dict
    irreducible: dict

    def c(self, i, j, k):
        if i == j:
            return Fraction(0)
        sign = 1
        if i > j:
            i, j, sign = j, i, -1
        return sign * self.constants.get((i, j), {}).get(k, Fraction(0))

    def nonvanishing(self):
        return {ij: cs for ij, cs in self.constants.items() if cs}

    def jacobi_defect(self):
        """Max |sum_m (c^m_ij c^l_mk + cyclic)| over the table; exact zero for
        a true Lie algebra.  Requires a fully reduced table."""
        if self.irreducible:
            raise ValueError("table has irreducible entries")
        n = len(self.names)
        worst = Fraction(0)
        for i in range(n):
            for j in range(i + 1, n):
                for k in range(j + 1, n):
                    for l in range(n):
                        s = Fraction(0)
                        for m in range(n):
                            s += self.c(i, j, m) * self.c(m, k, l)
                            s += self.c(j, k, m) * self.c(m, i, l)
                            s += self.c(k, i, m) * self.c(m, j, l)
                        worst = max(worst, abs(s))
        return worst


def bracket_table(basis) -> BracketTable:
    """All pairwise brackets of a basis, matched back onto the basis."""
    constants = {}
    irreducible = {}
    for i in range(len(basis)):
        for j in range(i + 1, len(basis)):
            br = lie_bracket(basis[i], basis[j])
            sol = match_to_basis(br, basis)
            if sol is None:
                irreducible[(i, j)] = {
                    slot: c_repr(br.coeff(slot)) for slot in br.slots()
                    if br.coeff(slot)
                }
            else:
                constants[(i, j)] = {
                    k: c for k, c in enumerate(sol) if c != 0
                }
    return BracketTable(tuple(g.name for g in basis), constants, irreducible)


# ---------------------------------------------------------------------- flows


def flow(gen: GeneratorSpec, eps, sol):
    """Finite flow applied to a space-time solution.

    Works on AnalyticSolution and SampledSolution alike: output samples at
    (t, x, y) are produced by pulling coordinates back through the inverse
    flow, sampling, and pushing the dependent values forward.  Spatial
    re-sampling of SampledSolutions is bicubic (periodic wrap / clamped
    edges); temporal re-sampling is cubic.  Coverage violations surface as
    CoverageError from the sampler.
    """
    if gen.flow is None:
        raise ValueError(f"generator {gen.name} has no closed-form flow")
    nl = sol.nlayers

    def sample(t, X, Y):
        zeros = tuple(0.0 for _ in range(nl))
        t0, X0, Y0, _ = gen.flow(-eps, t, X, Y, zeros)
        vals = sol.sample(t0, X0, Y0)
        _, _, _, out = gen.flow(eps, t0, X0, Y0, tuple(vals))
        return list(out)

    return AnalyticSolution(nl, sample)


@dataclass(frozen=True)
class InvarianceReport:
    generator: str
    epsilon: float
    residual_before: float
    residual_after: float
    ratio: float
    passed: bool

    def csv_row(self):
        return (
            f"{self.generator},{self.epsilon!r},{self.residual_before!r},"
            f"{self.residual_after!r},{self.ratio!r},{str(self.passed).lower()}"
        )


CSV_HEADER = "generator,epsilon,residual_before,residual_after,ratio,pass"


def verify_invariance(
    params, gen: GeneratorSpec, sol, eps, grid=None, times=None,
    trim=3, abs_tol=1e-10, ratio_limit=10.0,
) -> InvarianceReport:
    """Does the flow of gen map sol to another (discrete) solution?

    The discrete PDE residual (central differences in space and time, interior
    points only) is measured before and after the flow on the same grid and
    times; PASS iff residual_after <= ratio_limit * residual_before + abs_tol.
    """
    if grid is None:
        if not isinstance(sol, SampledSolution):
            raise ValueError("grid required for analytic solutions")
        grid = sol.grid
    if times is None:
        if not isinstance(sol, SampledSolution):
            raise ValueError("times required for analytic solutions")
        if len(sol.times) < 7:
            raise ValueError("need at least 7 snapshots to verify invariance")
        times = sol.times[2:-2]
    times = np.asarray(times, dtype=float)

    before = pde_residual_frames(
        params, grid, times, sample_frames(sol, grid, times), trim=trim
    )["max_overall"]
    moved = flow(gen, eps, sol)
    after = pde_residual_frames(
        params, grid, times, sample_frames(moved, grid, times), trim=trim
    )["max_overall"]
    ratio = after / before if before > 0 else math.inf
    passed = after <= ratio_limit * before + abs_tol
    return InvarianceReport(gen.name, eps, before, after, ratio, passed)
