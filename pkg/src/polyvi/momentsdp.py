"""Moment relaxations for polynomial programs and the hierarchy driver.

A program is  min theta(x)  over the set cut out by equality generators
(phi, each p = 0) and inequality generators (psi, each q >= 0).  The k-th
relaxation replaces a measure by its pseudo-moment vector y up to degree 2k:

    min  <theta, y>
    s.t. y_0 = 1
         <p * x^delta, y> = 0      for p in phi, |delta| <= 2(k - ceil(deg p / 2))
         M_k[y] >= 0               (moment matrix)
         L_q^k[y] >= 0             for q in psi (localizing matrices)

Relaxation values grow with k and lower-bound the true minimum.  An
infeasible relaxation certifies the program itself is infeasible.  Two
finite-convergence detectors turn an optimal y into actual minimizers: the
point check (the degree-one moments already form a feasible point achieving
the bound) and flat truncation (rank M_t == rank M_{t-d0}), after which
minimizers are read off a multiplication-operator eigendecomposition.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import sdpbackend as sb
from .polycore import MomentVector, Polynomial, basis

INFEASIBLE = "infeasible"
MINIMIZERS = "minimizers"
INCONCLUSIVE = "inconclusive"
BOUND_REACHED = "bound_reached"


class ExtractionFailed(RuntimeError):
    """Atom extraction could not reproduce the moment matrix."""


def half_degree(p: Polynomial) -> int:
    return max(1, math.ceil(p.degree / 2))


@dataclass(frozen=True)
class PolyProgram:
    """min theta over {p = 0 for p in phi, q >= 0 for q in psi}."""

    theta: Polynomial
    phi: tuple[Polynomial, ...]
    psi: tuple[Polynomial, ...]
    n: int

    def __post_init__(self):
        for p in (self.theta, *self.phi, *self.psi):
            if p.n != self.n:
                raise ValueError("program mixes polynomials of different arity")

    @property
    def d0(self) -> int:
        degs = [half_degree(self.theta)]
        degs += [half_degree(p) for p in self.phi]
        degs += [half_degree(q) for q in self.psi]
        return max(degs)

    def feasibility_error(self, x) -> float:
        err = 0.0
        for p in self.phi:
            err = max(err, abs(p.evaluate(x)))
        for q in self.psi:
            err = max(err, max(0.0, -q.evaluate(x)))
        return err


class LocalizingTemplate:
    """Symbolic localizing matrix of q at order k.

    Entry (i, j) is the list of (exponent, coef) pairs of q * x^(b_i + b_j),
    to be contracted against a moment vector.  The moment matrix itself is
    the localizing template of the constant 1.
    """

    def __init__(self, q: Polynomial, k: int, n: int):
        if q.is_zero:
            raise ValueError("cannot localize the zero polynomial")
        t = k - math.ceil(q.degree / 2)
        if t < 0:
            raise ValueError(f"order {k} too small to localize degree {q.degree}")
        self.q = q
        self.k = k
        self.n = n
        self.t = t
        self.row_basis = basis(n, t)
        self.size = len(self.row_basis)

    def entry(self, i: int, j: int) -> list[tuple[tuple[int, ...], float]]:
        bi = self.row_basis.exponents[i]
        bj = self.row_basis.exponents[j]
        shift = tuple(a + b for a, b in zip(bi, bj))
        return [
            (tuple(g + s for g, s in zip(exp, shift)), coef)
            for exp, coef in self.q.terms.items()
        ]

    def instantiate(self, y: MomentVector) -> np.ndarray:
        idx = y.basis.index_of
        mat = np.zeros((self.size, self.size))
        for i in range(self.size):
            for j in range(i, self.size):
                val = sum(c * y.values[idx(e)] for e, c in self.entry(i, j))
                mat[i, j] = mat[j, i] = val
        return mat


def localizing_template(q: Polynomial, k: int, n: int) -> LocalizingTemplate:
    return LocalizingTemplate(q, k, n)


@dataclass
class MomentRelaxation:
    """The k-th relaxation of a program, ready to hand to an SDP backend."""

    program: PolyProgram
    order: int
    num_moments: int
    objective: np.ndarray
    eq_rows: list[tuple[np.ndarray, float]]
    blocks: list[sb.SdpBlock]
    block_sources: list[str]

    def to_sdp(self) -> sb.SdpProblem:
        return sb.SdpProblem(self.num_moments, self.objective, self.eq_rows, self.blocks)

    def diagnostics(self) -> dict:
        return {
            "order": self.order,
            "num_moments": self.num_moments,
            "num_equalities": len(self.eq_rows),
            "blocks": [
                {"size": b.size, "source": src, "nnz": int(len(b.vals))}
                for b, src in zip(self.blocks, self.block_sources)
            ],
        }

    def diagnostics_json(self) -> str:
        return json.dumps(self.diagnostics(), indent=2)


def _template_block(tmpl: LocalizingTemplate, index_of) -> sb.SdpBlock:
    vi, rr, cc, vv = [], [], [], []
    for i in range(tmpl.size):
        for j in range(i, tmpl.size):
            for exp, coef in tmpl.entry(i, j):
                vi.append(index_of(exp))
                rr.append(i)
                cc.append(j)
                vv.append(coef)
    return sb.SdpBlock(
        tmpl.size,
        np.zeros((tmpl.size, tmpl.size)),
        np.array(vi, dtype=np.int64),
        np.array(rr, dtype=np.int64),
        np.array(cc, dtype=np.int64),
        np.array(vv, dtype=float),
    )


def build_relaxation(prog: PolyProgram, k: int) -> MomentRelaxation:
    if k < prog.d0:
        raise ValueError(f"relaxation order {k} below the program minimum d0={prog.d0}")
    n = prog.n
    b2k = basis(n, 2 * k)
    m = len(b2k)
    index_of = b2k.index_of

    c = np.zeros(m)
    for exp, coef in prog.theta.terms.items():
        c[index_of(exp)] += coef

    eq_rows: list[tuple[np.ndarray, float]] = []
    row0 = np.zeros(m)
    row0[0] = 1.0
    eq_rows.append((row0, 1.0))
    for p in prog.phi:
        if p.is_zero:
            continue
        t_p = k - math.ceil(p.degree / 2)
        for delta in basis(n, 2 * t_p).exponents:
            row = np.zeros(m)
            for exp, coef in p.terms.items():
                row[index_of(tuple(a + b for a, b in zip(exp, delta)))] += coef
            eq_rows.append((row, 0.0))

    one = Polynomial.constant(n, 1.0)
    blocks = [_template_block(localizing_template(one, k, n), index_of)]
    sources = ["moment"]
    for q in prog.psi:
        if q.is_zero:
            continue
        if q.degree == 0:
            # constant inequality: infeasible constant goes in as an
            # impossible 1x1 block, positive constants carry no information
            val = next(iter(q.terms.values()))
            if val < 0:
                blocks.append(
                    sb.SdpBlock(
                        1, np.array([[val]]),
                        np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64),
                        np.zeros(0, dtype=np.int64), np.zeros(0, dtype=float),
                    )
                )
                sources.append("constant")
            continue
        tmpl = localizing_template(q, k, n)
        blocks.append(_template_block(tmpl, index_of))
        sources.append(f"localizing deg {q.degree}")
    return MomentRelaxation(prog, k, m, c, eq_rows, blocks, sources)


@dataclass
class RelaxationSolve:
    status: str  # optimal | infeasible | unbounded | numerical_failure
    value: float | None
    y: MomentVector | None
    sdp: sb.SdpResult
    # worst of the solver's primal/dual/gap residuals; drives downstream tolerances
    accuracy: float = 0.0
    # False when the backend settled for reduced accuracy; rigorous shortcuts
    # (bound_stop) must not fire off an untrusted bound
    trusted: bool = True


def solve_relaxation(
    rel: MomentRelaxation,
    backend=None,
    tol: float = 1e-8,
    max_iters: int = 200,
) -> RelaxationSolve:
    backend = backend or sb.ReferenceBackend()
    res = backend.solve(rel.to_sdp(), tol=tol, max_iters=max_iters)
    if res.status == sb.OPTIMAL:
        y = MomentVector(rel.program.n, 2 * rel.order, res.y)
        info = res.residuals or {}
        acc = max(
            float(info.get("primal", tol)),
            float(info.get("dual", tol)),
            float(info.get("gap", tol)),
        )
        return RelaxationSolve(
            "optimal", float(res.objective), y, res,
            accuracy=acc, trusted=not info.get("relaxed", False),
        )
    if res.status == sb.PRIMAL_INFEASIBLE:
        return RelaxationSolve("infeasible", None, None, res)
    if res.status == sb.DUAL_INFEASIBLE:
        return RelaxationSolve("unbounded", None, None, res)
    return RelaxationSolve("numerical_failure", None, None, res)


# -- finite convergence detectors ------------------------------------------


def check_point_optimality(
    y: MomentVector,
    bound: float,
    prog: PolyProgram,
    tol_feas: float = 1e-6,
    tol_gap: float = 1e-6,
) -> np.ndarray | None:
    """The degree-one moments as a candidate minimizer, or None."""
    n = prog.n
    mono = [tuple(1 if j == i else 0 for j in range(n)) for i in range(n)]
    u = np.array([y.entry(e) for e in mono])
    if prog.feasibility_error(u) > tol_feas:
        return None
    if abs(prog.theta.evaluate(u) - bound) > tol_gap:
        return None
    return u


def moment_matrix(y: MomentVector, t: int) -> np.ndarray:
    bt = basis(y.n, t)
    idx = y.basis.index_of
    size = len(bt)
    mat = np.zeros((size, size))
    exps = bt.exponents
    for i in range(size):
        for j in range(i, size):
            e = tuple(a + b for a, b in zip(exps[i], exps[j]))
            mat[i, j] = mat[j, i] = y.values[idx(e)]
    return mat


def _numeric_rank(mat: np.ndarray, tol_rank: float) -> int:
    sv = np.linalg.svd(mat, compute_uv=False)
    if len(sv) == 0:
        return 0
    thr = tol_rank * max(float(sv[0]), 1.0)
    return int((sv > thr).sum())


def flat_truncation(y: MomentVector, d0: int, t: int, tol_rank: float = 1e-6) -> int | None:
    """Rank r when M_t[y] and M_{t-d0}[y] agree in numeric rank, else None."""
    if t < d0 or 2 * t > y.two_k:
        raise ValueError(f"need d0 <= t <= k, got t={t}, d0={d0}, 2k={y.two_k}")
    r_big = _numeric_rank(moment_matrix(y, t), tol_rank)
    r_small = _numeric_rank(moment_matrix(y, t - d0), tol_rank)
    return r_big if r_big == r_small else None


def _pivot_rows(p_mat: np.ndarray, r: int, tol: float) -> list[int] | None:
    """First r rows of p_mat (in order) that are numerically independent."""
    rows: list[int] = []
    q_basis = np.zeros((p_mat.shape[1], 0))
    for i in range(p_mat.shape[0]):
        v = p_mat[i].copy()
        if q_basis.shape[1]:
            v = v - q_basis @ (q_basis.T @ p_mat[i])
            v = v - q_basis @ (q_basis.T @ v)
        nv = np.linalg.norm(v)
        if nv > tol:
            q_basis = np.column_stack([q_basis, v / nv])
            rows.append(i)
            if len(rows) == r:
                return rows
    return None


def extract_minimizers(
    y: MomentVector,
    t: int,
    r: int,
    seed: int = 0,
    tol: float = 1e-6,
) -> list[np.ndarray]:
    """Read r atoms out of a flat moment matrix M_t[y].

    Raises ExtractionFailed when the reconstructed atomic measure does not
    reproduce M_t[y] to the requested tolerance.
    """
    n = y.n
    mat = moment_matrix(y, t)
    bt = basis(n, t)
    last_err = None
    for attempt_seed in (seed, seed + 1):
        try:
            return _extract_once(mat, bt, n, t, r, attempt_seed, tol)
        except ExtractionFailed as exc:
            last_err = exc
    raise last_err


def _extract_once(mat, bt, n, t, r, seed, tol) -> list[np.ndarray]:
    vals, vecs = np.linalg.eigh(mat)
    order = np.argsort(vals)[::-1]
    vals = vals[order[:r]]
    vecs = vecs[:, order[:r]]
    if vals.min() <= 0:
        raise ExtractionFailed(f"moment matrix has nonpositive retained eigenvalue {vals.min()}")
    p_mat = vecs * np.sqrt(vals)[None, :]

    scale = np.linalg.norm(p_mat) / math.sqrt(max(1, r))
    rows = _pivot_rows(p_mat, r, 1e-6 * max(scale, 1.0))
    if rows is None:
        raise ExtractionFailed("could not find an independent pivot row set")
    try:
        c_mat = np.linalg.solve(p_mat[rows].T, p_mat.T).T
    except np.linalg.LinAlgError:
        c_mat = p_mat @ np.linalg.pinv(p_mat[rows])

    idx = bt.index
    shift_ops = []
    for i in range(n):
        op = np.zeros((r, r))
        for j, row in enumerate(rows):
            e = list(bt.exponents[row])
            e[i] += 1
            e = tuple(e)
            if e not in idx:
                raise ExtractionFailed("pivot monomial shifts outside the truncation")
            op[j] = c_mat[idx[e]]
        shift_ops.append(op)

    rng = np.random.default_rng(seed)
    weights = rng.random(n) + 0.1
    weights /= weights.sum()
    combined = sum(w * op for w, op in zip(weights, shift_ops))
    _, q_mat = sla.schur(combined, output="real")
    atoms = []
    for a in range(r):
        q_a = q_mat[:, a]
        atoms.append(np.array([float(q_a @ op @ q_a) for op in shift_ops]))

    # merge near-duplicate atoms
    merged: list[np.ndarray] = []
    for u in atoms:
        if all(np.linalg.norm(u - v) > 1e-8 for v in merged):
            merged.append(u)

    design = np.column_stack(
        [np.outer(lv := _lift_vec(u, bt), lv).ravel() for u in merged]
    )
    w, *_ = np.linalg.lstsq(design, mat.ravel(), rcond=None)
    recon = (design @ w).reshape(mat.shape)
    err = np.linalg.norm(mat - recon) / max(1.0, np.linalg.norm(mat))
    if err > tol:
        raise ExtractionFailed(f"atom reconstruction residual {err:.3e} exceeds {tol:.1e}")
    return merged


def _lift_vec(u: np.ndarray, bt) -> np.ndarray:
    return np.prod(np.power(u[None, :], bt.exp_array), axis=1)


# -- hierarchy driver ---------------------------------------------------------


@dataclass
class HierarchyOptions:
    backend: object = None
    k_max_extra: int = 4
    tol_feas: float = 1e-6
    tol_gap: float = 1e-6
    tol_rank: float = 1e-6
    extract_tol: float = 1e-6
    sdp_tol: float = 1e-8
    sdp_max_iters: int = 200
    seed: int = 0
    skip_point_check: bool = False
    # callable bound -> bool; when it fires the driver exits without extraction
    bound_stop: object = None


@dataclass
class HierarchyOutcome:
    status: str
    order: int
    value: float | None = None
    points: list = field(default_factory=list)
    certificate: str | None = None
    flat_rank: int | None = None
    flat_t: int | None = None
    y: MomentVector | None = None
    log: list = field(default_factory=list)
    # accuracy of the solve behind value/points; callers widen their own
    # tolerances accordingly when the backend ran in relaxed mode
    accuracy: float = 0.0
    trusted: bool = True

    @property
    def is_infeasible(self) -> bool:
        return self.status == INFEASIBLE


def dilate_program(prog: PolyProgram, s) -> PolyProgram:
    """The program in z with x = s*z; minimizers and bounds transform exactly."""
    return PolyProgram(
        prog.theta.dilated(s),
        tuple(p.dilated(s) for p in prog.phi),
        tuple(p.dilated(s) for p in prog.psi),
        prog.n,
    )


def _scale_update(s_vec: np.ndarray, y: MomentVector) -> np.ndarray:
    # grow the dilation toward the diagonal second moments; never shrink, so
    # well-scaled problems keep the identity and stay bit-for-bit unchanged
    n = y.n
    m2 = np.array([y.entry(tuple(2 if j == i else 0 for j in range(n))) for i in range(n)])
    factors = np.clip(np.sqrt(np.maximum(m2, 1.0)), 1.0, 100.0)
    return np.minimum(s_vec * factors, 1e4)


def minimize(prog: PolyProgram, opts: HierarchyOptions | None = None) -> HierarchyOutcome:
    """Run relaxations of increasing order until a certificate fires.

    Orders after the first are solved in dilated coordinates sized from the
    latest moment estimate; large solution coordinates otherwise blow up the
    moment matrices' dynamic range and stall the backend.
    """
    opts = opts or HierarchyOptions()
    d0 = prog.d0
    log: list[dict] = []
    best_value: float | None = None
    last_y: MomentVector | None = None
    last_order = d0
    last_acc = 0.0
    last_trusted = True
    s_vec = np.ones(prog.n)

    for k in range(d0, d0 + opts.k_max_extra + 1):
        scaled = bool(np.any(s_vec != 1.0))
        prog_k = dilate_program(prog, s_vec) if scaled else prog
        rel = build_relaxation(prog_k, k)
        res = solve_relaxation(rel, opts.backend, opts.sdp_tol, opts.sdp_max_iters)
        entry = {"order": k, "status": res.status, "value": res.value}
        if scaled:
            entry["scale"] = [round(v, 3) for v in s_vec]
        log.append(entry)
        last_order = k

        if res.status == "infeasible":
            return HierarchyOutcome(INFEASIBLE, k, log=log)
        if res.status in ("unbounded", "numerical_failure"):
            continue

        bound = res.value
        best_value = bound if best_value is None else max(best_value, bound)
        s_used = s_vec
        last_y = res.y.dilated(s_used) if scaled else res.y
        last_acc, last_trusted = res.accuracy, res.trusted
        s_vec = _scale_update(s_used, last_y)

        def to_x(u):
            u = np.asarray(u, dtype=float)
            return s_used * u if scaled else u

        # reduced-accuracy solves widen every matching tolerance below; the
        # bound_stop shortcut stays gated on full-accuracy bounds only
        acc = res.accuracy
        gap_eff = max(opts.tol_gap, 30.0 * acc * max(1.0, abs(bound)))
        rank_eff = max(opts.tol_rank, 50.0 * acc)
        feas_eff = max(opts.tol_feas, 30.0 * acc)

        if res.trusted and opts.bound_stop is not None and opts.bound_stop(bound):
            return HierarchyOutcome(
                BOUND_REACHED, k, value=bound, y=last_y, log=log,
                accuracy=acc, trusted=True,
            )

        if not opts.skip_point_check:
            u = check_point_optimality(res.y, bound, prog_k, feas_eff, gap_eff)
            if u is not None:
                return HierarchyOutcome(
                    MINIMIZERS, k, value=bound, points=[to_x(u)],
                    certificate="point-optimality", y=last_y, log=log,
                    accuracy=acc, trusted=res.trusted,
                )

        for t in range(d0, k + 1):
            r = flat_truncation(res.y, d0, t, rank_eff)
            if r is None:
                continue
            try:
                extract_eff = max(opts.extract_tol, 50.0 * acc)
                points = extract_minimizers(res.y, t, r, opts.seed, extract_eff)
            except ExtractionFailed as exc:
                log.append({"order": k, "status": "extraction_failed", "detail": str(exc), "t": t})
                continue
            good = [
                to_x(u) for u in points
                if prog_k.feasibility_error(u) <= feas_eff
                and abs(prog_k.theta.evaluate(u) - bound) <= max(gap_eff, 1e-7 * abs(bound))
            ]
            if good:
                return HierarchyOutcome(
                    MINIMIZERS, k, value=bound, points=good,
                    certificate="flat-truncation", flat_rank=r, flat_t=t,
                    y=last_y, log=log, accuracy=acc, trusted=res.trusted,
                )
            log.append({"order": k, "status": "atoms_rejected", "t": t, "count": len(points)})

    return HierarchyOutcome(
        INCONCLUSIVE, last_order, value=best_value, y=last_y, log=log,
        accuracy=last_acc, trusted=last_trusted,
    )
