"""Command-line front end: every pipeline writes CSV files plus one manifest.json.

Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 check failure.
The default output directory comes from ``CONTACT_THERMO_OUT`` (else
``./contact_thermo_out``). ``--config FILE`` reads flat ``key = value``
lines that mirror the long flags; flags given on the command line win.
"""
from __future__ import annotations

import argparse
import ast
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .core import ContactHamiltonian, NonFiniteError, jet_hamiltonian_minus_cz
from .io import write_csv, write_manifest

OUT_ENV = "CONTACT_THERMO_OUT"
EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_CHECK = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Argument parser whose errors are one line and exit with status 1."""

    def error(self, message):
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# helpers


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def _outdir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or "contact_thermo_out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _params(args) -> dict:
    skip = {"func", "out", "config", "jobs", "seed"}
    return {k: v for k, v in vars(args).items() if k not in skip}


def _finish(args, outdir: Path, outputs, started, tolerances=None, extra=None, seed=None):
    write_manifest(outdir, args.command, _params(args), [str(o) for o in outputs], seed=seed,
                   tolerances=tolerances, started=started, extra=extra)
    for o in outputs:
        print(f"wrote {Path(outdir) / o}")


_SAFE_NAMES = {
    name: getattr(np, name)
    for name in ("exp", "log", "log1p", "sin", "cos", "tan", "sinh", "cosh", "tanh", "arctan", "arctanh",
                 "sqrt", "abs", "pi", "e")
}
_ALLOWED_NODES = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load, ast.Constant,
                  ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd)


def expression_hamiltonian(expr: str, period: float | None = None) -> ContactHamiltonian:
    """Hamiltonian from an arithmetic expression in p, q, z (finite-difference gradient)."""
    tree = ast.parse(expr, mode="eval")
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED_NODES):
            raise UsageError(f"unsupported syntax in --expr: {type(node).__name__}")
        if isinstance(node, ast.Name) and node.id not in _SAFE_NAMES and node.id not in ("p", "q", "z"):
            raise UsageError(f"unknown name in --expr: {node.id}")
        if isinstance(node, ast.Call) and not isinstance(node.func, ast.Name):
            raise UsageError("only plain function calls are allowed in --expr")
    code = compile(tree, "<expr>", "eval")

    def value(x):
        env = dict(_SAFE_NAMES, p=x[..., 0], q=x[..., 1], z=x[..., 2])
        return np.broadcast_to(eval(code, {"__builtins__": {}}, env), x.shape[:-1]).astype(float)

    value(np.zeros(3))  # surface name errors now
    return ContactHamiltonian(value, period=period, name=expr)


# ---------------------------------------------------------------------------
# subcommands


def cmd_check(args):
    from .checks import contact_identity_suite, gradient_agreement_suite, lambda_preservation_suite

    started = time.time()
    out = _outdir(args)
    results = (contact_identity_suite(args.points, args.seed) + lambda_preservation_suite(args.points, args.seed)
               + gradient_agreement_suite(min(args.points, 200), args.seed))
    write_csv(out / "check.csv", ["suite", "name", "max_residual", "tol", "points", "passed"],
              [r.as_row() for r in results])
    failed = [f"{r.suite}:{r.name}" for r in results if not r.passed]
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.suite} {r.name} max={r.max_residual:.3g} tol={r.tol:g}")
    _finish(args, out, ["check.csv"], started, seed=args.seed, extra={"failed": failed})
    return EXIT_CHECK if failed else EXIT_OK


def _flow_hamiltonian(args) -> ContactHamiltonian:
    if args.model == "moebius":
        from .models import MoebiusModel

        return MoebiusModel(args.eps, args.a_inf).hamiltonian()
    if args.model == "minus_cz":
        return jet_hamiltonian_minus_cz(args.c)
    if args.model == "ising":
        from .ising import IsingParams, relaxation_hamiltonian

        return relaxation_hamiltonian(IsingParams(args.b, args.beta, args.c))
    if args.model == "cooling":
        from .models import CoolingModel, cooling_hamiltonian

        return cooling_hamiltonian(CoolingModel(args.a, args.b, args.sigma, args.variant, args.eps, args.N))
    if args.model == "expr":
        if not args.expr:
            raise UsageError("--model expr needs --expr")
        return expression_hamiltonian(args.expr, args.period)
    raise UsageError(f"unknown model {args.model!r}")


def cmd_flow(args):
    from .flow import IntegratorConfig, integrate

    started = time.time()
    if len(args.x0) != 3:
        raise UsageError("--x0 needs three comma-separated numbers p,q,z")
    H = _flow_hamiltonian(args)
    out = _outdir(args)
    cfg = IntegratorConfig(rel_tol=args.rel_tol, abs_tol=args.abs_tol, max_time=args.t)
    traj = integrate(H, np.array(args.x0), cfg, t_eval=np.linspace(0.0, args.t, args.samples))
    traj.to_csv(out / "trajectory.csv")
    print("endpoint " + ",".join(repr(float(v)) for v in traj.endpoint) + f" status={traj.status}")
    _finish(args, out, ["trajectory.csv"], started, tolerances={"rel_tol": args.rel_tol, "abs_tol": args.abs_tol},
            extra={"hamiltonian": H.name, "status": traj.status})
    if traj.status == "failed":
        print(f"contact-thermo: numerical failure at t={float(traj.times[-1])!r}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_equilibrium(args):
    from .ising import IsingParams, equilibrium_branches, fold_point

    started = time.time()
    if not args.q_max > args.q_min:
        raise UsageError("--q-max must exceed --q-min")
    params = IsingParams(args.b, args.beta)
    out = _outdir(args)
    br = equilibrium_branches(params, (args.q_min, args.q_max), args.samples)
    br.to_csv(out / "branches.csv")
    fold = fold_point(args.b, args.beta) if params.case == "B" else None
    print(f"case {params.case}" + (f" fold {fold!r}" if fold is not None else ""))
    _finish(args, out, ["branches.csv"], started, extra={"case": params.case, "fold": fold})
    return EXIT_OK


def cmd_chord(args):
    from .ising import lambda_a_alpha
    from .legendrian import find_reeb_chords, zero_section

    started = time.time()
    out = _outdir(args)
    src = lambda_a_alpha(args.a, args.alpha, args.b, args.beta, (-args.window, args.window))
    chords = find_reeb_chords(src, zero_section((-args.window, args.window), frame="PQZ"),
                              (-args.window, args.window))
    rows = [c.as_row() for c in chords]
    write_csv(out / "chords.csv", ["Q", "Z_start", "length", "nondegenerate"], rows)
    for Q, Z, length, nd in rows:
        print(f"{Q!r},{Z!r},{length!r},{nd}")
    _finish(args, out, ["chords.csv"], started, extra={"count": len(rows)})
    return EXIT_OK


def cmd_shoot(args):
    from .ising import blocking_hamiltonian, lambda_a_alpha, make_admissible
    from .legendrian import zero_section
    from .relaxation import ShootingProblem, shoot

    started = time.time()
    out = _outdir(args)
    src = lambda_a_alpha(args.a, args.alpha, args.b, args.beta, (-args.window, args.window))
    if args.hamiltonian == "blocking":
        zmin = float(np.min(src.points(4000)[:, 2]))
        if not zmin > 0:
            raise UsageError("the blocking Hamiltonian needs a source lying above Z = 0")
        H = blocking_hamiltonian(args.c, 0.5 * zmin)
        target = zero_section((-args.window, args.window), frame="PQZ")
    else:
        H = make_admissible(args.c, args.tau, args.eps, args.rho).H
        target = zero_section(period=args.tau, frame="PQZ")
    prob = ShootingProblem(H, src, target, horizon=args.horizon, eps=args.capture_radius)
    rep = shoot(prob, grid_size=args.grid, refine=not args.no_refine)
    rep.to_csv(out / "shooting.csv")
    counts = rep.counts()
    n_plus = len(rep.captured_in_sigma_plus())
    print(" ".join(f"{k}={v}" for k, v in counts.items()) + f" captured_in_sigma_plus={n_plus}")
    _finish(args, out, ["shooting.csv"], started, tolerances={"capture_radius": args.capture_radius},
            extra={"counts": counts, "captured_in_sigma_plus": n_plus, "horizon": prob.horizon,
                   "boundaries": rep.boundaries})
    return EXIT_OK


def cmd_glauber(args):
    from . import glauber as gl

    started = time.time()
    out = _outdir(args)
    sys_ = gl.SpinSystem.curie_weiss(args.n, args.d, args.b, args.q, args.beta, args.c)
    M = sys_.size
    t = np.linspace(0.0, args.t_max, args.samples)
    engine = args.engine
    if engine == "master" and M > gl.MAX_MASTER_SITES:
        raise UsageError(f"the master engine is limited to |G| <= {gl.MAX_MASTER_SITES}; use --engine lumped")
    k0 = int(round(0.5 * M * (1.0 + args.m0)))
    s0 = np.where(np.arange(M) < k0, 1.0, -1.0)
    if engine == "master":
        # uniform over the configurations with k0 up spins, so the lumped law starts at k0 as well
        mags = gl.magnetization_of_states(M)
        pick = np.isclose(mags, (2.0 * k0 - M) / M)
        pi0 = pick / pick.sum()
        mean = gl.master_evolve(sys_, pi0, args.t_max, t) @ mags
        summary = gl.PathSummary(t, mean, np.zeros_like(mean), 0)
    elif engine == "lumped":
        pi0 = np.zeros(M + 1)
        pi0[k0] = 1.0
        P = gl.lumped_master_evolve(sys_, pi0, t)
        mags = (2.0 * np.arange(M + 1) - M) / M
        mean = P @ mags
        summary = gl.PathSummary(t, mean, np.zeros_like(mean), 0)
    elif engine == "gillespie":
        summary = gl.gillespie_ensemble(sys_, s0, t, args.runs, args.seed)
    elif engine == "discrete":
        steps = int(round(args.t_max / args.h))
        summary = gl.discrete_ensemble(sys_, s0, steps, args.h, args.runs, args.seed)
    else:  # perturbed
        from .ising import make_admissible

        adm = make_admissible(args.c, args.tau, args.eps, args.rho)
        res = gl.perturbed_ensemble(sys_, (2.0 * k0 - M) / M, args.Q0, args.Z0, adm.F, t, args.runs, args.seed)
        summary = res["m"]
    summary.to_csv(out / "summary.csv")
    print(f"engine={engine} |G|={M} final mean_m={float(summary.mean[-1])!r}")
    _finish(args, out, ["summary.csv"], started, seed=args.seed,
            extra={"engine": engine, "N": args.n, "d": args.d, "size": M})
    return EXIT_OK


def cmd_compare(args):
    from .ising import IsingParams, compare_scenarios

    started = time.time()
    out = _outdir(args)
    params = IsingParams(args.b, args.beta, args.c)

    def one(delta):
        return compare_scenarios(params, delta, args.K, n_q=args.n_q, n_e=args.n_e)

    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        rows = list(pool.map(one, args.delta))  # map keeps the input order
    write_csv(out / "compare.csv", ["delta", "K", "max_discrepancy", "samples"],
              [(r["delta"], r["K"], r["max_discrepancy"], r["samples"]) for r in rows])
    for r in rows:
        print(f"delta={r['delta']!r} max_discrepancy={r['max_discrepancy']!r}")
    _finish(args, out, ["compare.csv"], started)
    return EXIT_OK


def cmd_cooling(args):
    from .models import CoolingModel, cooling_flow, cooling_isentropic, cooling_sine, fit_decay_rate

    started = time.time()
    out = _outdir(args)
    if len(args.x0) != 3:
        raise UsageError("--x0 needs three comma-separated numbers p,q,z")
    b = 0.0 if args.variant in ("isentropic", "sine") else args.b
    model = CoolingModel(args.a, b, args.sigma, args.variant, args.eps, args.N)
    t_eval = np.linspace(0.0, args.t, args.samples)
    extra = {}
    if args.variant == "coupled":
        res = cooling_flow(model, args.x0, args.t, t_eval)
        traj = res["trajectory"]
        P = (model.coordinates()(traj.points))[:, 0]
        ok = np.abs(P) > 1e-8
        extra["fitted_rate"] = fit_decay_rate(traj.times[ok], P[ok]) if ok.sum() > 2 else None
        extra["closed_form_error"] = res["closed_form_error"]
    elif args.variant == "isentropic":
        res = cooling_isentropic(model, args.x0, args.t, t_eval)
        extra["q_drift"] = res["q_drift"]
    else:
        res = cooling_sine(model, args.x0, args.t, t_eval)
        extra.update(increment=res["increment"], q_target=res["q_target"], monotone=res["monotone"])
    res["trajectory"].to_csv(out / "trajectory.csv")
    print("endpoint " + ",".join(repr(float(v)) for v in res["endpoint"]))
    for k, v in extra.items():
        print(f"{k}={v!r}")
    _finish(args, out, ["trajectory.csv"], started, extra=extra)
    return EXIT_OK


def cmd_moebius(args):
    from .legendrian import constant_section
    from .models import MoebiusModel, moebius_trajectory
    from .relaxation import ShootingProblem, shoot

    started = time.time()
    out = _outdir(args)
    model = MoebiusModel(args.eps, args.a_inf)
    res = moebius_trajectory(model, np.array(args.x0), args.t, np.linspace(0.0, args.t, args.samples))
    res["trajectory"].to_csv(out / "trajectory.csv")
    outputs = ["trajectory.csv"]
    extra = {"closed_form_error": res["closed_form_error"], "compared_samples": res["compared_samples"]}
    print(f"closed_form_error={res['closed_form_error']!r}")
    if args.kc:
        H = model.hamiltonian()
        target = constant_section(-1.0, period=2 * math.pi)
        rows = []
        for c in args.kc:
            rep = shoot(ShootingProblem(H, constant_section(c, period=2 * math.pi), target), grid_size=16,
                        refine=False, keep_trajectories=False)
            rows.append((c, rep.counts()["captured"], len(rep.results)))
            print(f"K_c c={c!r} captured={rows[-1][1]}/{rows[-1][2]}")
        write_csv(out / "kc_shooting.csv", ["c", "captured", "samples"], rows)
        outputs.append("kc_shooting.csv")
    _finish(args, out, outputs, started, extra=extra)
    return EXIT_OK


def cmd_cores(args):
    from .legendrian import constant_section
    from .models import MoebiusModel
    from .relaxation import compute_cores

    started = time.time()
    out = _outdir(args)
    model = MoebiusModel(args.eps, args.a_inf)
    two_pi = 2 * math.pi
    res = compute_cores(model.hamiltonian(), model.torus, (0.0, two_pi), (0.01, two_pi + 0.01), args.n_u,
                        args.n_v, args.s_max, candidates=(constant_section(-1.0, period=two_pi),
                                                          constant_section(1.0, period=two_pi)),
                        candidate_samples=args.candidate_samples)
    cols = ["p", "q", "z"]
    write_csv(out / "gamma.csv", cols, res.gamma)
    write_csv(out / "cloud_minus.csv", cols, res.cloud_minus)
    write_csv(out / "cloud_plus.csv", cols, res.cloud_plus)
    print(f"hausdorff_minus={res.hausdorff_minus!r} hausdorff_plus={res.hausdorff_plus!r}")
    _finish(args, out, ["gamma.csv", "cloud_minus.csv", "cloud_plus.csv"], started,
            extra={"hausdorff_minus": res.hausdorff_minus, "hausdorff_plus": res.hausdorff_plus})
    return EXIT_OK


def cmd_hyperbolicity(args):
    from .legendrian import estimate_hyperbolicity, zero_section

    started = time.time()
    out = _outdir(args)
    est = estimate_hyperbolicity(jet_hamiltonian_minus_cz(args.c), zero_section((-5.0, 5.0)), t_max=args.t_max,
                                 samples=args.samples)
    write_csv(out / "hyperbolicity.csv", ["a_est", "b_est", "c_est", "normally_hyperbolic"],
              [(est.a_est, est.b_est, est.c_est, est.normally_hyperbolic)])
    print(f"a_est={est.a_est!r} b_est={est.b_est!r} c_est={est.c_est!r}")
    _finish(args, out, ["hyperbolicity.csv"], started)
    return EXIT_OK


def cmd_figures(args):
    from .ising import IsingParams, equilibrium_branches, lambda_a_alpha
    from .models import MoebiusModel, moebius_closed_form

    started = time.time()
    out = _outdir(args)
    outputs = []
    # Moebius phase portrait: closed-form orbits of w' = w^2 - 1 inside the solid torus
    MoebiusModel()  # validates the default profile
    rows = []
    t = np.linspace(-3.0, 3.0, 121)
    for k, ang in enumerate(np.linspace(0.0, 2 * math.pi, 16, endpoint=False)):
        for r in (0.5, 0.9):
            w = moebius_closed_form(r * complex(math.cos(ang), math.sin(ang)), t)
            rows.extend((f"{k}_{r}", ti, wi.real, wi.imag) for ti, wi in zip(t, w) if abs(wi) ** 2 < 1.1)
    write_csv(out / "moebius_portrait.csv", ["orbit", "t", "z", "p"], rows)
    outputs.append("moebius_portrait.csv")
    equilibrium_branches(IsingParams(6.0, 1.0), (-8.0, 8.0), 801).to_csv(out / "branches_b6_beta1.csv")
    outputs.append("branches_b6_beta1.csv")
    for prm in ((4.0, 1.0, 1.5, 0.4), (4.0, 0.2, 2.0, 0.1), (1.0, 1.0, 2.0, 1.0)):
        name = "front_" + "_".join(f"{v:g}" for v in prm) + ".csv"
        lambda_a_alpha(*prm, window=(-10.0, 10.0)).to_csv(out / name, m=400)
        outputs.append(name)
    _finish(args, out, outputs, started)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="contact-thermo", description="Contact Hamiltonian thermodynamics toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        p.set_defaults(func=func)
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./contact_thermo_out)")
        p.add_argument("--config", help="key = value file mirroring the long flags")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--jobs", type=int, default=1, help="worker threads for parameter grids")
        return p

    p = add("check", cmd_check, "contact identity and lambda-preservation suites")
    p.add_argument("--points", type=int, default=1000)

    p = add("flow", cmd_flow, "integrate a named or user-specified Hamiltonian")
    p.add_argument("--model", choices=["moebius", "minus_cz", "ising", "cooling", "expr"], required=True)
    p.add_argument("--expr", help="H(p, q, z) for --model expr, e.g. '-z + 0.1*sin(q)'")
    p.add_argument("--period", type=float, default=None, help="q-period for --model expr")
    p.add_argument("--x0", type=_floats, required=True)
    p.add_argument("--t", type=_positive, required=True)
    p.add_argument("--rel-tol", type=_positive, default=1e-10)
    p.add_argument("--abs-tol", type=_positive, default=1e-12)
    p.add_argument("--samples", type=int, default=201)
    p.add_argument("--a", type=float, default=2.0)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--beta", type=_positive, default=1.0)
    p.add_argument("--c", type=_positive, default=1.0)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--variant", choices=["coupled", "isentropic", "sine"], default="coupled")
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--N", type=int, default=1)
    p.add_argument("--a-inf", type=float, default=2.0)

    p = add("equilibrium", cmd_equilibrium, "equilibrium branch table and fold point")
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--beta", type=_positive, required=True)
    p.add_argument("--q-min", type=float, default=-5.0)
    p.add_argument("--q-max", type=float, default=5.0)
    p.add_argument("--samples", type=int, default=1024)

    p = add("chord", cmd_chord, "Reeb chords from Lambda_{a,alpha} to the zero section")
    for name in ("a", "alpha", "b", "beta"):
        p.add_argument(f"--{name}", type=_positive, required=True)
    p.add_argument("--window", type=_positive, default=10.0)

    p = add("shoot", cmd_shoot, "shooting from Lambda_{a,alpha} to Lambda_{b,beta}")
    for name in ("a", "alpha", "b", "beta"):
        p.add_argument(f"--{name}", type=_positive, required=True)
    p.add_argument("--c", type=_positive, default=1.0)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--tau", type=_positive, default=2 * math.pi)
    p.add_argument("--rho", type=_positive, default=0.1)
    p.add_argument("--grid", type=int, default=64)
    p.add_argument("--horizon", type=_positive, default=None)
    p.add_argument("--capture-radius", type=_positive, default=1e-3)
    p.add_argument("--window", type=_positive, default=10.0)
    p.add_argument("--hamiltonian", choices=["admissible", "blocking"], default="admissible")
    p.add_argument("--no-refine", action="store_true")

    p = add("glauber", cmd_glauber, "Glauber dynamics (Curie-Weiss coupling)")
    p.add_argument("--engine", choices=["master", "lumped", "gillespie", "discrete", "perturbed"], required=True)
    p.add_argument("--n", type=int, required=True, help="side length N of (Z_N)^d")
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--b", type=float, default=0.5)
    p.add_argument("--beta", type=_positive, default=1.0)
    p.add_argument("--q", type=float, default=0.3)
    p.add_argument("--c", type=_positive, default=1.0)
    p.add_argument("--runs", type=int, default=1000)
    p.add_argument("--t-max", type=_positive, default=5.0)
    p.add_argument("--samples", type=int, default=51)
    p.add_argument("--m0", type=float, default=1.0)
    p.add_argument("--h", type=_positive, default=0.01, help="time step of the discrete engine")
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--tau", type=_positive, default=2 * math.pi)
    p.add_argument("--rho", type=_positive, default=0.1)
    p.add_argument("--Q0", type=float, default=0.0)
    p.add_argument("--Z0", type=float, default=0.0)

    p = add("compare", cmd_compare, "scenario I vs scenario II discrepancy")
    p.add_argument("--b", type=float, default=6.0)
    p.add_argument("--beta", type=_positive, default=1.0)
    p.add_argument("--c", type=_positive, default=1.0)
    p.add_argument("--delta", type=_floats, default=[0.0, 1e-3, 1e-2, 1e-1])
    p.add_argument("--K", type=_positive, default=5.0)
    p.add_argument("--n-q", type=int, default=41)
    p.add_argument("--n-e", type=int, default=11)

    p = add("cooling", cmd_cooling, "Newton's law of cooling as a contact flow")
    p.add_argument("--variant", choices=["coupled", "isentropic", "sine"], default="coupled")
    p.add_argument("--a", type=_positive, default=2.0)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=0.5)
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--N", type=int, default=3)
    p.add_argument("--x0", type=_floats, default=[3.0, -0.4, 1.2])
    p.add_argument("--t", type=_positive, default=20.0)
    p.add_argument("--samples", type=int, default=401)

    p = add("moebius", cmd_moebius, "contact Moebius flow against its closed form")
    p.add_argument("--x0", type=_floats, default=[0.5, 0.0, 0.0])
    p.add_argument("--t", type=_positive, default=10.0)
    p.add_argument("--samples", type=int, default=401)
    p.add_argument("--eps", type=_positive, default=0.1)
    p.add_argument("--a-inf", type=float, default=2.0)
    p.add_argument("--kc", type=_floats, default=None, help="shoot from K_c for these c values")

    p = add("cores", cmd_cores, "cores of the invariant Moebius torus")
    p.add_argument("--n-u", type=int, default=2048)
    p.add_argument("--n-v", type=int, default=8)
    p.add_argument("--s-max", type=_positive, default=15.0)
    p.add_argument("--candidate-samples", type=int, default=16384)
    p.add_argument("--eps", type=_positive, default=0.1)
    p.add_argument("--a-inf", type=float, default=2.0)

    p = add("hyperbolicity", cmd_hyperbolicity, "normal hyperbolicity of the zero section under H = -cZ")
    p.add_argument("--c", type=_positive, default=1.0)
    p.add_argument("--t-max", type=_positive, default=8.0)
    p.add_argument("--samples", type=int, default=32)

    add("figures", cmd_figures, "data behind the phase portrait, branch and front plots")
    return parser


def _read_config(path: str) -> list[str]:
    """Turn ``key = value`` lines into long-flag tokens."""
    tokens = []
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        flag = "--" + key.replace("_", "-") if key not in ("N", "K", "Q0", "Z0") else "--" + key
        if value.lower() == "true":
            tokens.append(flag)
        elif value.lower() != "false":
            tokens += [flag, value]
    return tokens


def _expand_config(argv: list[str]) -> list[str]:
    """Insert config-file tokens right after the subcommand so explicit flags override them."""
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            path, rest = argv[i + 1], argv[:i] + argv[i + 2:]
            break
        if tok.startswith("--config="):
            path, rest = tok.split("=", 1)[1], argv[:i] + argv[i + 1:]
            break
    else:
        return argv
    cmd_at = next((j for j, t in enumerate(rest) if not t.startswith("-")), None)
    if cmd_at is None:
        raise UsageError("--config needs a subcommand")
    return rest[:cmd_at + 1] + _read_config(path) + rest[cmd_at + 1:]


def _attach_negative_values(argv: list[str]) -> list[str]:
    """Rewrite ``--flag -2,2`` as ``--flag=-2,2`` so argparse accepts values that start with '-'."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        nxt = argv[i + 1] if i + 1 < len(argv) else None
        if (tok.startswith("--") and "=" not in tok and nxt is not None and nxt.startswith("-")
                and not nxt.startswith("--") and nxt != "-h"):
            out.append(f"{tok}={nxt}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _attach_negative_values(_expand_config(argv))
        args = build_parser().parse_args(argv)
        if args.jobs < 1:
            raise UsageError("--jobs must be at least 1")
        with np.errstate(over="ignore", under="ignore"):
            return args.func(args)
    except SystemExit as exc:  # argparse --help / --version / error()
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"contact-thermo: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NonFiniteError, FloatingPointError, ArithmeticError) as exc:
        print(f"contact-thermo: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:  # inconsistent parameters rejected by the library
        print(f"contact-thermo: error: {' '.join(str(exc).split())}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
