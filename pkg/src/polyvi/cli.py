"""Problem files, random instance families, and the polyvi command line.

Problem file schema (JSON):

    {
      "name": "optional label",
      "n": 4,
      "F": [ [{"coef": 3.0, "exp": [2,0,0,0]}, ...], ... ],       # n entries
      "constraints": [ {"poly": [...], "kind": "eq"|"ineq"}, ... ],
      "lme": {"kind": "orthant"}                                   # or {"L": ...}
                                                                   # or {"lambdas": ..., "denoms": ...}
      "options": {"seed": 3, "max_loops": 10, ...}                 # optional
    }

Exit codes: 0 solved / certified / accepted, 1 bad input, 2 inconclusive
or rejected.
"""

import dataclasses
import json
import os
import sys
import time

import click
import numpy as np

from .lme import ConstraintSystem, LmeRecipe, TemplateMismatch, kkt_residual
from .polycore import Polynomial, basis
from .vipsolver import (
    SolverOptions,
    VipProblem,
    active_subset_bounds,
    build_problem,
    solve_all,
    solve_one,
    verify_candidate,
)


class ProblemFileError(Exception):
    """A problem file that cannot be parsed or validated."""


_OPTION_FIELDS = tuple(
    f.name for f in dataclasses.fields(SolverOptions) if f.name != "backend"
)


def _fail(msg: str):
    raise ProblemFileError(msg)


def _poly_from_json(n, data, where):
    if not isinstance(data, list):
        _fail(f"{where}: expected a list of terms")
    for i, item in enumerate(data):
        if not isinstance(item, dict) or "coef" not in item or "exp" not in item:
            _fail(f"{where}, term {i}: need 'coef' and 'exp'")
        if len(item["exp"]) != n:
            _fail(f"{where}, term {i}: exponent length {len(item['exp'])} != n={n}")
        if any(int(e) < 0 for e in item["exp"]):
            _fail(f"{where}, term {i}: negative exponent")
    return Polynomial.from_json(n, data)


def parse_problem(data: dict, source: str = "<data>"):
    """Build (VipProblem, SolverOptions) from a problem-file dict."""
    if not isinstance(data, dict):
        _fail(f"{source}: top level must be an object")
    for key in ("n", "F", "constraints", "lme"):
        if key not in data:
            _fail(f"{source}: missing required key '{key}'")
    n = data["n"]
    if not isinstance(n, int) or n < 1:
        _fail(f"{source}: n must be a positive integer")
    if len(data["F"]) != n:
        _fail(f"{source}: F has {len(data['F'])} entries, expected n={n}")
    F = tuple(
        _poly_from_json(n, item, f"{source}: F[{i}]") for i, item in enumerate(data["F"])
    )
    g, eq_idx, ineq_idx = [], [], []
    for i, item in enumerate(data["constraints"]):
        where = f"{source}: constraints[{i}]"
        if not isinstance(item, dict) or "poly" not in item or "kind" not in item:
            _fail(f"{where}: need 'poly' and 'kind'")
        if item["kind"] not in ("eq", "ineq"):
            _fail(f"{where}: kind must be 'eq' or 'ineq', got {item['kind']!r}")
        g.append(_poly_from_json(n, item["poly"], where))
        (eq_idx if item["kind"] == "eq" else ineq_idx).append(i)
    cs = ConstraintSystem(tuple(g), tuple(eq_idx), tuple(ineq_idx), n)
    try:
        problem = build_problem(F, cs, data["lme"], name=str(data.get("name", "")))
    except (TemplateMismatch, ValueError, TypeError) as exc:
        _fail(f"{source}: lme: {exc}")
    opts_data = data.get("options", {})
    unknown = set(opts_data) - set(_OPTION_FIELDS)
    if unknown:
        _fail(f"{source}: unknown options {sorted(unknown)}")
    return problem, SolverOptions(**opts_data)


def load_problem(path: str):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ProblemFileError(f"{path}: {exc.strerror or exc}")
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}")
    return parse_problem(data, source=path)


def _recipe_spec(recipe: LmeRecipe) -> dict:
    if recipe.kind is not None:
        return {"kind": recipe.kind}
    if recipe.matrix is not None:
        return {"L": [[p.to_json() for p in row] for row in recipe.matrix.rows]}
    lam = recipe.explicit
    spec = {"lambdas": [p.to_json() for p in lam.lambdas]}
    if lam.denoms is not None:
        spec["denoms"] = [None if q is None else q.to_json() for q in lam.denoms]
    return spec


def problem_to_dict(problem: VipProblem, options: dict | None = None) -> dict:
    cs = problem.cs
    out = {
        "name": problem.name,
        "n": problem.n,
        "F": [f.to_json() for f in problem.F],
        "constraints": [
            {"poly": cs.g[i].to_json(), "kind": "eq" if i in cs.eq_idx else "ineq"}
            for i in range(cs.m)
        ],
        "lme": _recipe_spec(problem.recipe),
    }
    if options:
        out["options"] = options
    return out


# -- random families ----------------------------------------------------------


def _monomials_up_to(n: int, d: int):
    return [tuple(e) for e in basis(n, d).exponents]


def gen_ball(n: int, d: int, seed: int) -> dict:
    """F = A [x]_d with standard normal A; X the unit ball."""
    rng = np.random.default_rng(seed)
    monos = _monomials_up_to(n, d)
    a_mat = rng.standard_normal((n, len(monos)))
    F = [
        Polynomial(n, {e: float(a_mat[i, j]) for j, e in enumerate(monos) if a_mat[i, j]})
        for i in range(n)
    ]
    ball = {(0,) * n: 1.0}
    for t in range(n):
        ball[tuple(2 if j == t else 0 for j in range(n))] = -1.0
    return {
        "name": f"ball-n{n}-d{d}-seed{seed}",
        "n": n,
        "F": [f.to_json() for f in F],
        "constraints": [{"poly": Polynomial(n, ball).to_json(), "kind": "ineq"}],
        "lme": {"kind": "ball"},
    }


def _eig_data(n: int, seed: int):
    rng = np.random.default_rng(seed)
    a_mat = rng.standard_normal((n, n))
    b_hat = rng.standard_normal((n, n))
    return a_mat, b_hat.T @ b_hat


def _linear_field(mat: np.ndarray) -> list:
    n = mat.shape[0]
    return [
        Polynomial(
            n,
            {
                tuple(1 if j == t else 0 for j in range(n)): float(mat[i, t])
                for t in range(n)
                if mat[i, t]
            },
        )
        for i in range(n)
    ]


def _quadric(b_mat: np.ndarray) -> Polynomial:
    n = b_mat.shape[0]
    terms = {(0,) * n: -1.0}
    for i in range(n):
        for j in range(n):
            if b_mat[i, j]:
                e = [0] * n
                e[i] += 1
                e[j] += 1
                terms[tuple(e)] = terms.get(tuple(e), 0.0) + float(b_mat[i, j])
    return Polynomial(n, terms)


def gen_eig_linear(n: int, seed: int) -> dict:
    """F = A x over {x^T B x = 1} cut with the x_1-dominant linear cone."""
    a_mat, b_mat = _eig_data(n, seed)
    cons = [{"poly": _quadric(b_mat).to_json(), "kind": "eq"}]
    lead = {tuple(1 if j == 0 else 0 for j in range(n)): 1.0}
    for t in range(1, n):
        lead[tuple(1 if j == t else 0 for j in range(n))] = -1.0
    cons.append({"poly": Polynomial(n, lead).to_json(), "kind": "ineq"})
    for t in range(1, n):
        cons.append(
            {"poly": Polynomial.variable(n, t).to_json(), "kind": "ineq"}
        )
    return {
        "name": f"eig-linear-n{n}-seed{seed}",
        "n": n,
        "F": [f.to_json() for f in _linear_field(a_mat)],
        "constraints": cons,
        "lme": {"kind": "quadric_with_linear"},
    }


def gen_eig_soc(n: int, seed: int) -> dict:
    """F = A x over {x^T B x = 1} inside the second-order cone."""
    a_mat, b_mat = _eig_data(n, seed)
    cone = {tuple(2 if j == n - 1 else 0 for j in range(n)): 1.0}
    for t in range(n - 1):
        cone[tuple(2 if j == t else 0 for j in range(n))] = -1.0
    return {
        "name": f"eig-soc-n{n}-seed{seed}",
        "n": n,
        "F": [f.to_json() for f in _linear_field(a_mat)],
        "constraints": [
            {"poly": _quadric(b_mat).to_json(), "kind": "eq"},
            {"poly": Polynomial(n, cone).to_json(), "kind": "ineq"},
        ],
        "lme": {"kind": "soc_quadric"},
    }


def gen_capital(n1: int, n2: int, seed: int, rho: float = 0.8) -> dict:
    """Stationary activity/stock field over the nonnegative orthant.

    f(x) = [x]_1^T C^T C [x]_1 with C one row/column wider than n1 so the
    affine part of the loss is generated too.
    """
    rng = np.random.default_rng(seed)
    n = n1 + n2
    a_mat = rng.standard_normal((n2, n1))
    c_mat = rng.standard_normal((n1 + 1, n1 + 1))
    b_vec = rng.standard_normal(n2)
    b_mat = rng.random((n2, n1))

    q = c_mat.T @ c_mat  # f(x) = [1,x] q [1,x]^T over the x block
    grad = []
    for i in range(n1):
        terms = {(0,) * n: 2.0 * float(q[0, i + 1])}
        for j in range(n1):
            e = tuple(1 if t == j else 0 for t in range(n))
            terms[e] = 2.0 * float(q[i + 1, j + 1])
        grad.append(Polynomial(n, terms))
    m_mat = a_mat.T - rho * b_mat.T
    F = []
    for i in range(n1):
        p = grad[i]
        for j in range(n2):
            if m_mat[i, j]:
                p = p + Polynomial(
                    n, {tuple(1 if t == n1 + j else 0 for t in range(n)): float(m_mat[i, j])}
                )
        F.append(p)
    d_mat = b_mat - a_mat
    for j in range(n2):
        terms = {(0,) * n: float(b_vec[j])}
        for i in range(n1):
            if d_mat[j, i]:
                terms[tuple(1 if t == i else 0 for t in range(n))] = float(d_mat[j, i])
        F.append(Polynomial(n, terms))
    return {
        "name": f"capital-n{n1}x{n2}-seed{seed}",
        "n": n,
        "F": [f.to_json() for f in F],
        "constraints": [
            {"poly": Polynomial.variable(n, t).to_json(), "kind": "ineq"} for t in range(n)
        ],
        "lme": {"kind": "orthant"},
    }


FAMILIES = ("ball", "eig-linear", "eig-soc", "capital")


def generate(family: str, dims: tuple[int, ...], degree: int, seed: int) -> dict:
    if family == "ball":
        if len(dims) != 1 or dims[0] < 1:
            _fail("ball family needs dims N with N >= 1")
        return gen_ball(dims[0], degree, seed)
    if family == "eig-linear":
        if len(dims) != 1 or dims[0] < 2:
            _fail("eig-linear family needs dims N with N >= 2")
        return gen_eig_linear(dims[0], seed)
    if family == "eig-soc":
        if len(dims) != 1 or dims[0] < 2:
            _fail("eig-soc family needs dims N with N >= 2")
        return gen_eig_soc(dims[0], seed)
    if family == "capital":
        if len(dims) != 2 or min(dims) < 1:
            _fail("capital family needs dims N1,N2")
        return gen_capital(dims[0], dims[1], seed)
    _fail(f"unknown family {family!r}; choose from {', '.join(FAMILIES)}")


# -- reports -------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    return obj


def _fmt_point(p) -> str:
    return "(" + ", ".join(f"{v: .6f}" for v in p) + ")"


def _render_solutions(report: dict) -> str:
    lines = [f"status      {report['status']}"]
    if "complete" in report:
        lines.append(f"complete    {'yes' if report['complete'] else 'no'}")
    if report.get("certificate_order") is not None:
        lines.append(f"cert order  {report['certificate_order']}")
    lines.append(f"time        {report['time']:.2f}s")
    sols = report.get("solutions", [])
    if sols:
        lines.append("")
        lines.append(f"{'#':>2}  {'eps':>10}  {'objective':>12}  point")
        for i, s in enumerate(sols, 1):
            lines.append(
                f"{i:>2}  {s['eps']:>10.2e}  {s['objective']:>12.6f}  {_fmt_point(s['point'])}"
            )
    return "\n".join(lines)


def _emit(report: dict, as_json: bool, out: str | None, render=_render_solutions):
    text = json.dumps(_jsonable(report), indent=2) if as_json else render(report)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        click.echo(text)


def _seed_option(value):
    if value is not None:
        return value
    env = os.environ.get("POLYVI_SEED")
    return int(env) if env else 0


# -- commands ------------------------------------------------------------------


@click.group()
def main():
    """Polynomial variational inequality solver."""


@main.command("solve")
@click.argument("file", type=click.Path())
@click.option("--all", "mode_all", is_flag=True, help="Enumerate the full solution set.")
@click.option("--one", "mode_one", is_flag=True, help="Stop after the first solution (default).")
@click.option("--seed", type=int, default=None, help="Objective seed (POLYVI_SEED fallback).")
@click.option("--max-loops", type=int, default=None)
@click.option("--max-order-extra", type=int, default=None, help="Relaxation orders past d0.")
@click.option("--json", "as_json", is_flag=True)
@click.option("--out", type=click.Path(), default=None)
def cmd_solve(file, mode_all, mode_one, seed, max_loops, max_order_extra, as_json, out):
    """Solve the problem in FILE; exit 0 solved/certified, 2 inconclusive."""
    if mode_all and mode_one:
        click.echo("choose one of --all / --one", err=True)
        sys.exit(1)
    try:
        problem, opts = load_problem(file)
    except ProblemFileError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    opts = dataclasses.replace(
        opts,
        seed=_seed_option(seed if seed is not None else (opts.seed or None)),
        **({"max_loops": max_loops} if max_loops is not None else {}),
        **({"k_max_extra": max_order_extra} if max_order_extra is not None else {}),
    )
    t0 = time.time()
    report = {"command": "solve", "file": file, "mode": "all" if mode_all else "one"}
    if mode_all:
        res = solve_all(problem, opts)
        report.update(
            status=res.status,
            complete=res.complete,
            certificate_order=res.order,
            solutions=[
                {"point": p, "eps": e, "objective": o}
                for p, e, o in zip(res.solutions, res.eps, res.objectives)
            ],
            log=res.log,
        )
        ok = res.status in ("solutions", "no_solution")
    else:
        res = solve_one(problem, opts)
        report.update(
            status=res.status,
            certificate_order=res.order,
            loops=res.loops,
            solutions=[]
            if res.point is None
            else [{"point": res.point, "eps": res.eps, "objective": res.objective}],
            log=res.log,
        )
        ok = res.status in ("solution", "no_solution")
    report["time"] = time.time() - t0
    _emit(report, as_json, out)
    sys.exit(0 if ok else 2)


@main.command("verify")
@click.argument("file", type=click.Path())
@click.option("--point", required=True, help="Comma-separated coordinates.")
@click.option("--json", "as_json", is_flag=True)
def cmd_verify(file, point, as_json):
    """Check whether POINT solves the problem in FILE (gap tolerance 1e-6)."""
    try:
        problem, opts = load_problem(file)
    except ProblemFileError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    try:
        u = np.array([float(v) for v in point.replace(" ", "").split(",") if v != ""])
    except ValueError:
        click.echo(f"error: cannot parse point {point!r}", err=True)
        sys.exit(1)
    if len(u) != problem.n:
        click.echo(f"error: point has {len(u)} coordinates, expected {problem.n}", err=True)
        sys.exit(1)
    t0 = time.time()
    feas = problem.cs.membership_error(u)
    res = verify_candidate(problem, u, opts)
    accepted = res.status == "solution" and feas <= opts.tol_feas
    report = {
        "command": "verify",
        "file": file,
        "point": u,
        "eps": res.eps,
        "kkt_residual": kkt_residual(u, problem.kkt),
        "membership_error": feas,
        "accepted": accepted,
        "verdict": "accepted" if accepted else "rejected",
        "via": res.via,
        "time": time.time() - t0,
    }

    def render(rep):
        rows = [
            f"point            {_fmt_point(rep['point'])}",
            f"eps              {rep['eps'] if rep['eps'] is not None else 'n/a (inconclusive)'}",
            f"kkt residual     {rep['kkt_residual']:.3e}",
            f"membership error {rep['membership_error']:.3e}",
            f"verdict          {rep['verdict']}",
        ]
        return "\n".join(rows)

    _emit(report, as_json, None, render)
    sys.exit(0 if accepted else 2)


@main.command("bound")
@click.argument("file", type=click.Path())
@click.option("--json", "as_json", is_flag=True)
def cmd_bound(file, as_json):
    """Print candidate-count bounds per active constraint subset."""
    try:
        problem, _ = load_problem(file)
    except ProblemFileError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    rows, total = active_subset_bounds(problem)
    report = {
        "command": "bound",
        "file": file,
        "subsets": [{"active": list(r["active"]), "bound": r["bound"]} for r in rows],
        "total": total,
    }

    def render(rep):
        lines = [f"{'active set':<20} bound"]
        for r in rep["subsets"]:
            label = "{" + ",".join(str(i) for i in r["active"]) + "}"
            lines.append(f"{label:<20} {r['bound']}")
        lines.append(f"{'total':<20} {rep['total']}")
        return "\n".join(lines)

    _emit(report, as_json, None, render)


@main.command("gen-random")
@click.argument("family", type=click.Choice(FAMILIES))
@click.option("--dims", required=True, help="N, or N1,N2 for the capital family.")
@click.option("--degree", type=int, default=2, help="Field degree (ball family).")
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), default=None)
def cmd_gen_random(family, dims, degree, seed, out):
    """Generate a random problem file from a named family."""
    try:
        dim_tuple = tuple(int(v) for v in dims.split(","))
    except ValueError:
        click.echo(f"error: cannot parse dims {dims!r}", err=True)
        sys.exit(1)
    try:
        data = generate(family, dim_tuple, degree, _seed_option(seed))
        parse_problem(data, source=f"generated {family}")  # self check
    except ProblemFileError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    text = json.dumps(data, indent=2)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        click.echo(text)


@main.command("batch")
@click.argument("family", type=click.Choice(FAMILIES))
@click.option("--dims", required=True)
@click.option("--count", type=int, default=10)
@click.option("--degree", type=int, default=2)
@click.option("--seed", type=int, default=None)
@click.option("--json", "as_json", is_flag=True)
def cmd_batch(family, dims, count, degree, seed, as_json):
    """Solve COUNT random instances; report the success rate and mean time."""
    try:
        dim_tuple = tuple(int(v) for v in dims.split(","))
    except ValueError:
        click.echo(f"error: cannot parse dims {dims!r}", err=True)
        sys.exit(1)
    seed0 = _seed_option(seed)
    runs = []
    for i in range(count):
        s = seed0 + i
        try:
            data = generate(family, dim_tuple, degree, s)
            problem, _ = parse_problem(data, source=f"instance {i}")
        except ProblemFileError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)
        t0 = time.time()
        try:
            res = solve_one(problem, SolverOptions(seed=s))
            solved = res.status == "solution" and abs(res.eps) <= 1e-6
            certified_empty = res.status == "no_solution"
            status = res.status
        except Exception as exc:  # instance failures count against SR only
            solved, certified_empty, status = False, False, f"error: {exc}"
        runs.append(
            {
                "seed": s,
                "status": status,
                "success": bool(solved or certified_empty),
                "time": time.time() - t0,
            }
        )
    successes = sum(r["success"] for r in runs)
    report = {
        "command": "batch",
        "family": family,
        "dims": list(dim_tuple),
        "degree": degree if family == "ball" else None,
        "count": count,
        "success_rate": successes / count if count else None,
        "mean_time": (sum(r["time"] for r in runs) / count) if count else None,
        "runs": runs,
    }

    def render(rep):
        if not rep["count"]:
            return "no instances"
        head = f"{'family':<12} {'dims':<8} {'count':>5} {'SR':>7} {'mean time':>10}"
        dims_s = "x".join(str(d) for d in rep["dims"])
        row = (
            f"{rep['family']:<12} {dims_s:<8} {rep['count']:>5} "
            f"{100 * rep['success_rate']:>6.0f}% {rep['mean_time']:>9.2f}s"
        )
        return "\n".join([head, row])

    _emit(report, as_json, None, render)


if __name__ == "__main__":
    main()
