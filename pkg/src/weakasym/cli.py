"""Command-line driver.

Every subcommand prints its main result to stdout.  With ``--out DIR`` it
also writes CSV/JSON artifacts plus ``manifest.json`` (inputs, their
hash, library version, achieved tolerances).  Artifacts contain no
timestamps or timings, so identical inputs give identical bytes.

``WEAKASYM_THREADS`` caps the BLAS/OpenMP thread count; it must be set
before the process starts.  Exit codes: 0 success, 1 numerical or
acceptance failure, 2 usage error.
"""

from __future__ import annotations

import os

if os.environ.get("WEAKASYM_THREADS"):
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, os.environ["WEAKASYM_THREADS"])

import argparse
import csv
import hashlib
import io
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import WeakAsymError

CONFIG_VERSION = 1


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# output helpers


class Artifacts:
    def __init__(self, out: str | None, command: str, inputs: dict):
        self.dir = Path(out) if out else None
        self.command = command
        self.inputs = inputs
        self.files: dict[str, str] = {}
        self.achieved: dict = {}

    def _write(self, name: str, text: str):
        self.files[name] = hashlib.sha256(text.encode()).hexdigest()
        if self.dir is not None:
            self.dir.mkdir(parents=True, exist_ok=True)
            (self.dir / name).write_text(text)

    def json(self, name: str, obj):
        text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
        self._write(name, text)
        return text

    def csv(self, name: str, header, rows, meta: dict | None = None):
        buf = io.StringIO()
        for k, v in sorted((meta or {}).items()):
            buf.write(f"# {k}: {v}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(x) for x in r])
        text = buf.getvalue()
        self._write(name, text)
        return text

    def manifest(self):
        canon = json.dumps(self.inputs, sort_keys=True)
        return self.json(
            "manifest.json",
            dict(
                command=self.command,
                config_version=CONFIG_VERSION,
                inputs=self.inputs,
                inputs_sha256=hashlib.sha256(canon.encode()).hexdigest(),
                library_version=__version__,
                tolerances_achieved=self.achieved,
                artifacts=dict(sorted(self.files.items())),
            ),
        )


def _cell(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


def _cjson(z) -> dict:
    return {"re": float(np.real(z)), "im": float(np.imag(z))}


def _parse_kv(text: str) -> tuple[str, dict]:
    """``name:k=v,k=v`` into ``(name, {k: float})``."""
    name, _, rest = text.partition(":")
    params = {}
    for item in filter(None, rest.split(",")):
        if "=" not in item:
            raise UsageError(f"bad parameter {item!r} in {text!r}")
        k, v = item.split("=", 1)
        try:
            params[k.strip()] = float(v)
        except ValueError as exc:
            raise UsageError(f"parameter {k!r} must be numeric") from exc
    return name.strip(), params


def _json_arg(text: str) -> dict:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError:
        path = Path(text)
        if not path.exists():
            raise UsageError(f"not JSON and not a file: {text!r}")
        obj = json.loads(path.read_text())
    if not isinstance(obj, dict):
        raise UsageError("JSON parameters must be an object")
    return obj


def _positive(name, value):
    if not (value > 0):
        raise UsageError(f"--{name} must be positive")
    return value


def _G_from_spec(spec: str, d: int):
    from .harmonics import canonical_tree

    kind, _, rest = spec.partition(":")
    if kind == "const":
        return lambda x: np.ones(len(x))
    if kind == "harmonic":
        try:
            Ks = [int(k) for k in rest.split(",") if k]
        except ValueError as exc:
            raise UsageError("harmonic degrees must be integers") from exc
        if not Ks:
            raise UsageError("--g harmonic:K,... needs at least one degree")
        tree = canonical_tree(d)
        idx = [next(ix for ix in tree.basis(K) if ix.K == K) for K in Ks]
        return lambda x: tree.evaluate(idx, x).sum(axis=1)
    if kind == "exp":
        coef = np.array([float(c) for c in rest.split(",")]) if rest else np.zeros(d)
        if coef.size != d:
            raise UsageError(f"exp:... needs {d} coefficients")
        return lambda x: np.exp(x @ coef)
    raise UsageError(f"unknown G spec {spec!r}")


def _xgrid(spec: str) -> np.ndarray:
    parts = spec.split(":")
    try:
        lo, hi = float(parts[0]), float(parts[1])
        kind = parts[2] if len(parts) > 2 else "geometric"
        n = int(parts[3]) if len(parts) > 3 else 9
    except (IndexError, ValueError) as exc:
        raise UsageError("--xgrid is lo:hi[:geometric|linear[:n]]") from exc
    if not (0 < lo < hi) or n < 2:
        raise UsageError("--xgrid needs 0 < lo < hi and n >= 2")
    if kind == "geometric":
        return np.geomspace(lo, hi, n)
    if kind == "linear":
        return np.linspace(lo, hi, n)
    raise UsageError(f"unknown grid kind {kind!r}")


# --------------------------------------------------------------------------
# subcommands


def cmd_partitions(a) -> int:
    from math import factorial

    from .partitions import enumerate_chains, enumerate_partitions

    n = a.n
    if n < 2 or n > 7:
        raise UsageError("--n must be in 2..7")
    art = Artifacts(a.out, "partitions", dict(n=n, chains=a.chains))
    out = dict(n=n, partitions={str(k): [str(p) for p in enumerate_partitions(n, k)] for k in range(1, n + 1)})
    if a.chains:
        chains = enumerate_chains(n)
        formula = factorial(n) * factorial(n - 1) // 2 ** (n - 1)
        out.update(chains=[str(c) for c in chains], chain_count=len(chains), formula=formula,
                   formula_check=len(chains) == formula)
        art.achieved["chain_count_match"] = len(chains) == formula
    print(art.json("partitions.json", out), end="")
    art.manifest()
    return 0 if out.get("formula_check", True) else 1


def cmd_jacobi(a) -> int:
    from .jacobi import MassSet, build_jacobi, chain_rotation, kinetic_form
    from .partitions import PartitionChain, enumerate_chains

    try:
        masses = tuple(float(m) for m in a.masses.split(","))
    except ValueError as exc:
        raise UsageError("--masses must be comma-separated numbers") from exc
    ms = MassSet(masses)
    chain = PartitionChain.parse(ms.n, a.chain) if a.chain else enumerate_chains(ms.n)[0]
    sys_ = build_jacobi(ms, chain)
    rng = np.random.default_rng(a.seed)
    r = rng.normal(size=(16, ms.n, 3))
    M = sum(masses)
    pair = sum(
        masses[i] * masses[j] * np.sum((r[:, i] - r[:, j]) ** 2, axis=1)
        for i in range(ms.n) for j in range(i + 1, ms.n)
    ) * 2 / M
    inv = float(np.max(np.abs(kinetic_form(sys_, r) - pair)))
    orth = max(
        float(np.max(np.abs(R @ R.T - np.eye(sys_.d))))
        for R in (chain_rotation(sys_, build_jacobi(ms, c)) for c in enumerate_chains(ms.n))
    )
    art = Artifacts(a.out, "jacobi", dict(masses=list(masses), chain=str(chain), seed=a.seed))
    art.achieved.update(kinetic_invariance=inv, rotation_orthogonality=orth)
    out = dict(chain=str(chain), coeffs=sys_.coeffs.tolist(), matrix=sys_.matrix.tolist(),
               pairs=[[p[0], list(p[1]), list(p[2])] for p in sys_.pairs],
               diagnostics=dict(kinetic_invariance=inv, rotation_orthogonality=orth))
    print(art.json("jacobi.json", out), end="")
    art.manifest()
    return 0 if inv < 1e-10 and orth < 1e-12 else 1


def cmd_harmonics(a) -> int:
    from .harmonics import canonical_tree, harmonic_count, laplace_beltrami_fd

    d, kmax = a.d, a.kmax
    if not (3 <= d <= 9) or kmax < 0:
        raise UsageError("need 3 <= d <= 9 and kmax >= 0")
    tree = canonical_tree(d)
    idx = tree.basis(kmax)
    Ks = np.array([ix.K for ix in idx])
    rows = []
    orth = np.zeros(kmax + 1)
    eig = np.zeros(kmax + 1)
    if a.check:
        quad = tree.quadrature(kmax + 1)
        gram = np.zeros((len(idx), len(idx)))
        for s in range(0, len(quad), 20000):
            Y = tree.evaluate(idx, quad.nodes[s:s + 20000])
            gram += (Y * quad.weights[s:s + 20000, None]).T @ Y
        dev = np.abs(gram - np.eye(len(idx)))
        rng = np.random.default_rng(a.seed)
        x0 = rng.normal(size=d)
        x0 /= np.linalg.norm(x0)
        for K in range(kmax + 1):
            orth[K] = dev[Ks == K].max()
            ix = idx[int(np.flatnonzero(Ks == K)[0])]
            f = lambda x, ix=ix: tree.evaluate([ix], x[None])[0, 0]
            lb = laplace_beltrami_fd(f, x0, 1e-3)
            y0 = f(x0)
            eig[K] = abs(lb + K * (K + d - 2) * y0) / max(abs(y0), 1e-3)
    for K in range(kmax + 1):
        rows.append([K, harmonic_count(d, K), int(np.sum(Ks == K)), orth[K], eig[K]])
    art = Artifacts(a.out, "harmonics", dict(d=d, kmax=kmax, check=a.check, seed=a.seed))
    art.achieved.update(orthonormality=float(orth.max()), eigenvalue_fd=float(eig.max()))
    print(art.csv("harmonics.csv", ["K", "count_formula", "count_basis", "orth_err", "eigen_fd_err"], rows,
                  dict(d=d, kmax=kmax)), end="")
    art.manifest()
    ok = all(r[1] == r[2] for r in rows) and (not a.check or (orth.max() < 1e-10 and eig.max() < 1e-3))
    return 0 if ok else 1


def cmd_lemma2(a) -> int:
    from .oscillatory import J_asymptotic, J_exact

    d = a.d
    P = np.eye(d)[0] * _positive("pmag", a.pmag)
    G = _G_from_spec(a.g, d)
    xs = _xgrid(a.xgrid)
    e = np.ones(d) / np.sqrt(d)
    rows = []
    for x in xs:
        ex = J_exact(x * e, P, G).value
        asy = J_asymptotic(x, P, G)
        err = abs(ex - asy)
        # G may vanish at +-P^, in which case only the absolute error is meaningful
        rows.append([x, ex.real, ex.imag, asy.real, asy.imag, err, err / abs(asy) if asy != 0 else float("inf")])
    err = np.array([r[-2] for r in rows])
    rel = np.array([r[-1] for r in rows])
    slope = float(np.polyfit(np.log(xs), np.log(np.maximum(err, 1e-300)), 1)[0])
    art = Artifacts(a.out, "lemma2", dict(d=d, pmag=a.pmag, g=a.g, xgrid=a.xgrid))
    art.achieved.update(max_abs=float(err.max()), max_rel=float(rel.max()), abs_err_slope=slope)
    print(art.csv("lemma2.csv", ["X", "exact_re", "exact_im", "asym_re", "asym_im", "abs_err", "rel_err"],
                  rows, dict(d=d, pmag=a.pmag, g=a.g, abs_err_slope=f"{slope:.6f}")), end="")
    art.manifest()
    return 0


def _twobody_model(spec: str):
    from .tmatrix import gaussian_model, yamaguchi_model

    name, p = _parse_kv(spec)
    if name == "yamaguchi":
        lam = p.get("lambda", p.get("lam"))
        return yamaguchi_model(p.get("beta", 1.0), lam=lam, kappa=p.get("kappa"))
    if name == "gaussian":
        return gaussian_model(p.get("v0", -1.0), p.get("b", 1.0))
    raise UsageError(f"unknown two-body model {name!r}")


def cmd_twobody(a) -> int:
    from .tmatrix import ls_solve_twobody, twobody_s_kernel

    model = _twobody_model(a.model)
    E = _positive("energy", a.energy)
    sk = twobody_s_kernel(np.sqrt(E), model, lmax=a.lmax)
    rows = []
    worst = 0.0
    for ell in range(a.lmax + 1):
        r = ls_solve_twobody(model, E, ell)
        skw = sk.partial_wave_S(ell)
        worst = max(worst, r.unitarity_residual)
        rows.append([ell, r.delta, r.S.real, r.S.imag, r.unitarity_residual, skw.real, skw.imag])
    art = Artifacts(a.out, "twobody", dict(model=a.model, energy=E, lmax=a.lmax))
    art.achieved["unitarity_residual"] = worst
    print(art.csv("twobody.csv", ["ell", "delta", "S_re", "S_im", "unitarity_residual", "skernel_re", "skernel_im"],
                  rows, dict(model=a.model, energy=E)), end="")
    art.manifest()
    return 0


def _poly(coefs):
    c = np.asarray(coefs, dtype=complex) if coefs is not None else np.array([1.0 + 0j])
    return lambda u: np.polyval(c[::-1], np.asarray(u)) + 0j * np.asarray(u)


def cmd_singular(a) -> int:
    from .singular import F_pm, FpmOptions, cauchy_log_subtraction, delta_reduce_Dm, endpoint_weighted_pole
    from .singular import smoothness_certificate
    from .tmatrix import model_NBody_kernel

    p = _json_arg(a.params) if a.params else {}
    art = Artifacts(a.out, "singular", dict(case=a.case, params=p))
    sweep_rows = None
    if a.case == "i1":
        r = cauchy_log_subtraction(_poly(p.get("B")), float(p.get("zeta", 0.0)), int(p.get("side", 1)))
    elif a.case == "i2":
        r = endpoint_weighted_pole(_poly(p.get("B")), float(p.get("z", -1.0)), int(p.get("side", -1)))
    elif a.case == "dm":
        alpha = float(p.get("alpha", 0.4))
        tc = lambda kk, *_: np.exp(-alpha * np.sum(kk * kk, axis=1))
        G = _G_from_spec(p.get("G", "const"), 6)
        r = delta_reduce_Dm(tc, G, np.asarray(p.get("p", [0.3, 0.0, 0.0]), float), float(p.get("R", 1.0)), 6)
    elif a.case == "fpm":
        T = model_NBody_kernel(p.get("kernel", {"kind": "gaussian"}))
        P = np.asarray(p.get("P", [0.0, 0.0, 0.9, 0.19**0.5, 0.0, 0.0]), float)
        G = _G_from_spec(p.get("G", "const"), P.size)
        opts = FpmOptions(estimate_error=bool(p.get("estimate_error", True)))
        sign = int(p.get("sign", 1))
        r = F_pm(T, P, float(p.get("R", 1.0)), G, sign, opts)
        if "sweep" in p:
            c, hw = (float(x) for x in p["sweep"])
            f = lambda R: F_pm(T, P, float(R), G, sign, FpmOptions(estimate_error=False)).value
            cert = smoothness_certificate(f, c, hw)
            sweep_rows = [[h, b] for h, b in zip(cert["steps"], cert["max_second_derivative"])]
            art.achieved["refinement_ratio"] = cert["ratio"]
    else:
        raise UsageError(f"unknown case {a.case!r}")
    art.achieved["error_estimate"] = r.error_estimate
    out = dict(case=a.case, value=_cjson(r.value), error_estimate=r.error_estimate, regularization=r.regularization,
               flags=list(r.flags))
    print(art.json("singular.json", out), end="")
    if sweep_rows is not None:
        print(art.csv("smoothness.csv", ["step", "max_second_derivative"], sweep_rows), end="")
    art.manifest()
    return 0


def _potential(spec: dict, d: int):
    from .hyperradial import PairwisePotential, gaussian_hypercentral, gaussian_pair

    kind = spec.get("kind")
    if kind == "zero":
        return None
    if kind == "hypercentral-gaussian":
        return gaussian_hypercentral(float(spec.get("v0", -1.0)), float(spec.get("b", 1.0)))
    if kind == "pairwise-gaussian":
        n = d // 3 + 1
        masses = spec.get("masses", [1.0] * n)
        return PairwisePotential(masses, gaussian_pair(float(spec.get("v0", -0.3)), float(spec.get("b", 1.0))))
    raise UsageError(f"unknown potential kind {kind!r}")


def cmd_solve(a) -> int:
    from .hyperradial import channel_basis, match_extract_S, solve_coupled

    spec = _json_arg(a.potential)
    V = _potential(spec, a.d)
    basis = channel_basis(a.d, a.kmax)
    sol = solve_coupled(basis, V, _positive("energy", a.energy), rho_max=_positive("rho-max", a.rho_max), h=a.h,
                        tail_tol=float(spec.get("tail_tol", 1e-4)))
    S = match_extract_S(sol)
    art = Artifacts(a.out, "solve", dict(d=a.d, kmax=a.kmax, potential=spec, energy=a.energy, rho_max=a.rho_max,
                                         h=a.h))
    art.achieved.update(unitarity_defect=S.unitarity_defect, symmetry_defect=S.symmetry_defect,
                        matching_condition=S.condition)
    out = dict(
        channels=[str(ix) for ix in basis.indices],
        S=[[_cjson(z) for z in row] for row in S.values],
        unitarity_defect=S.unitarity_defect,
        symmetry_defect=S.symmetry_defect,
        meta=S.meta,
    )
    text = art.json("smatrix.json", out)
    phases = S.eigenphases()
    art.csv("eigenphases.csv", ["index", "eigenphase"], [[i, x] for i, x in enumerate(phases)],
            dict(d=a.d, kmax=a.kmax, energy=a.energy))
    if a.out:
        print(json.dumps(dict(unitarity_defect=S.unitarity_defect, symmetry_defect=S.symmetry_defect,
                              channels=len(basis)), sort_keys=True))
    else:
        print(text, end="")
    art.manifest()
    return 0


def cmd_weakcheck(a) -> int:
    from .hyperradial import default_xgrid, weak_asymptotics_check
    from .tmatrix import GaussianKernel, ZeroKernel

    d = a.d
    name, p = _parse_kv(a.t)
    if name == "gaussian":
        T = GaussianKernel(d, p.get("c", 0.5), p.get("a", 1.0), p.get("b", 0.5))
    elif name == "zero":
        T = ZeroKernel(d)
    else:
        raise UsageError(f"unknown kernel {name!r} for weakcheck")
    rng = np.random.default_rng(a.seed)
    P = rng.normal(size=d)
    P *= _positive("pmag", a.pmag) / np.linalg.norm(P)
    coef = np.zeros(d)
    coef[0], coef[-1] = 0.3, -0.2
    G = lambda x: np.exp(x @ coef)
    xs = default_xgrid(a.pmag)
    r = weak_asymptotics_check(T, P, G, xgrid=xs)
    rows = [[x, dv.real, dv.imag, av.real, av.imag, e] for x, dv, av, e in zip(r.xgrid, r.direct, r.asymptotic,
                                                                                r.deviation)]
    art = Artifacts(a.out, "weakcheck", dict(t=a.t, d=d, pmag=a.pmag, seed=a.seed))
    art.achieved.update(deviation_at_max=float(r.deviation[-1]), incoming_error=r.incoming_error, slope=r.slope)
    print(art.csv("weakcheck.csv", ["X", "direct_re", "direct_im", "asym_re", "asym_im", "rel_dev"], rows,
                  dict(kernel=a.t, d=d, slope=f"{r.slope:.6f}", monotone=r.monotone,
                       incoming_error=f"{r.incoming_error:.6e}")), end="")
    art.manifest()
    return 0


def run_accept(suite: str, out: str | None, stream=None) -> tuple[bool, list, list]:
    """Run a suite; returns the verdict, per-criterion results and wall times."""
    from .acceptance import CRITERIA, SUITES

    stream = stream or sys.stdout

    if suite not in SUITES:
        raise UsageError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}")
    art = Artifacts(out, "accept", dict(suite=suite))
    results, times = [], []
    for n in SUITES[suite]:
        t0 = time.perf_counter()
        res = CRITERIA[n]()
        dt = time.perf_counter() - t0
        results.append(res)
        times.append(dt)
        art.json(f"criterion_{n}.json", res.to_json())
        print(f"{res.line()} [{dt:.1f}s]", file=stream, flush=True)
    ok = all(r.passed for r in results)
    art.achieved = {str(r.number): r.passed for r in results}
    art.manifest()
    print(f"suite {suite}: {'PASS' if ok else 'FAIL'} ({sum(r.passed for r in results)}/{len(results)})", file=stream)
    return ok, results, times


def cmd_accept(a) -> int:
    ok, _, _ = run_accept(a.suite, a.out)
    return 0 if ok else 1


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="weakasym", description="weak-asymptotics scattering toolkit")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command")

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--out", help="directory for artifacts and manifest")
        p.set_defaults(func=fn)
        return p

    p = add("partitions", cmd_partitions, "partitions and chains of {1..N}")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--chains", action="store_true")

    p = add("jacobi", cmd_jacobi, "Jacobi transform for a chain")
    p.add_argument("--masses", required=True)
    p.add_argument("--chain", default=None, help="chain spec, e.g. '(12)(3)'")
    p.add_argument("--seed", type=int, default=0)

    p = add("harmonics", cmd_harmonics, "hyperspherical harmonic diagnostics")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--kmax", type=int, required=True)
    p.add_argument("--check", action="store_true")
    p.add_argument("--seed", type=int, default=0)

    p = add("lemma2", cmd_lemma2, "exact vs asymptotic sphere averages")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--pmag", type=float, default=1.0)
    p.add_argument("--xgrid", default="20:320:geometric")
    p.add_argument("--g", default="const")

    p = add("twobody", cmd_twobody, "two-body phase shifts and S kernel")
    p.add_argument("--model", required=True)
    p.add_argument("--energy", type=float, required=True)
    p.add_argument("--lmax", type=int, default=2)

    p = add("singular", cmd_singular, "regularized singular integrals")
    p.add_argument("--case", required=True, choices=["i1", "i2", "dm", "fpm"])
    p.add_argument("--params", default=None, help="JSON object or path to a JSON file")

    p = add("solve", cmd_solve, "coupled hyperradial S-matrix")
    p.add_argument("--d", type=int, default=6)
    p.add_argument("--kmax", type=int, default=6)
    p.add_argument("--potential", required=True, help="JSON object or path")
    p.add_argument("--energy", type=float, required=True)
    p.add_argument("--rho-max", dest="rho_max", type=float, default=40.0)
    p.add_argument("--h", type=float, default=0.01)

    p = add("weakcheck", cmd_weakcheck, "integral representation vs weak asymptotics")
    p.add_argument("--t", default="gaussian:a=1")
    p.add_argument("--d", type=int, default=6)
    p.add_argument("--pmag", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)

    p = add("accept", cmd_accept, "run acceptance criteria")
    p.add_argument("suite")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        a = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) if exc.code in (0, None) else 2
    if not getattr(a, "func", None):
        ap.print_usage(sys.stderr)
        return 2
    try:
        return a.func(a)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except WeakAsymError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2 if isinstance(exc, ValueError) else 1


if __name__ == "__main__":
    sys.exit(main())
