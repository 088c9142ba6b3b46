"""Command-line front end.

    swlbm stability check --model d2q9-salmon --g 0.009 --e 15 --hbar 2 --tau 1.5
    swlbm stability scan  --model d2q9-salmon --g-grid 0.01:1:100 --e 1 --hbar 1 --tau 1 --out map.csv
    swlbm sim run --config run.json
    swlbm bench hump --g 0.009 --lattice 500x50
    swlbm bench table T4

Exit status: 0 success (Stable / converged / all cells classified as printed),
1 negative outcome (Unstable / not converged / mismatch), 2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, benchmarks, kernels, output
from .lattice import EquilibriumSpec, Family
from .solver import DivergenceDetected
from .stability import SingularScalingError, Verdict, scan, verify_stability, write_scan_csv

EXIT_OK, EXIT_NEGATIVE, EXIT_ERROR = 0, 1, 2

MODELS = {
    "d2q7": Family.D2Q7,
    "d2q9-salmon": Family.D2Q9_SALMON,
    "d2q9-lambda": Family.D2Q9_LAMBDA,
    "d2q9-standard": Family.D2Q9_STANDARD,
}

CASE_DEFAULTS = {
    "hump": {"g": 0.009, "lattice": "500x50", "lambda": None, "max_iterations": 150_000,
             "threshold": 5e-6, "output_every": 0},
    "tidal": {"g": 1.0 / 600.0, "lattice": "1000x50", "lambda": None, "t_end": benchmarks.TIDAL_T_END,
              "initial": "analytic", "output_every": 0},
    "expansion": {"g": 1.0 / 6.0, "lambda": 1.0, "max_iterations": 100_000, "threshold": 5e-6,
                  "output_every": 0},
}


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# parsing helpers


def parse_grid(text: str) -> list[float]:
    """'a:b:n' (n points, inclusive) or a comma list."""
    text = text.strip()
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise ValueError
            a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
            if n < 1 or (n == 1 and a != b):
                raise ValueError
            vals = [a] if n == 1 else list(np.linspace(a, b, n))
        else:
            vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"malformed grid {text!r}; use 'start:stop:count' or a comma list") from None
    if not vals or not all(math.isfinite(v) for v in vals):
        raise UsageError(f"malformed grid {text!r}")
    return [float(v) for v in vals]


def _positive(name):
    def conv(text):
        v = float(text)
        if not (v > 0 and math.isfinite(v)):
            raise argparse.ArgumentTypeError(f"{name} must be positive and finite, got {text}")
        return v

    return conv


# ---------------------------------------------------------------------------
# stability


def cmd_stability_check(args) -> int:
    family = MODELS[args.model]
    try:
        spec = EquilibriumSpec(family, args.g, args.e, args.lam if args.lam is not None else 1.0)
        rep = verify_stability(spec, args.hbar, args.tau, args.tol)
    except (SingularScalingError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    d = rep.as_dict()
    if args.json:
        print(json.dumps(output._clean(d), indent=2))
    else:
        print(f"verdict: {d['verdict']}")
        for key in ("projection_defect", "symmetry_defect", "scaling_positive_definite",
                    "jacobian_rank", "collision_rank"):
            print(f"{key}: {d[key]}")
        print("eigenvalues: " + " ".join(f"{x:.6g}" for x in d["eigenvalues"]))
        for r in d["reasons"]:
            print(f"note: {r}")
    return {Verdict.STABLE: EXIT_OK, Verdict.UNSTABLE: EXIT_NEGATIVE}.get(rep.verdict, EXIT_ERROR)


def cmd_stability_scan(args) -> int:
    g_grid = parse_grid(args.g_grid)
    lam_grid = parse_grid(args.lambda_grid) if args.lambda_grid else None
    grid = scan(MODELS[args.model], g_grid, lam_grid, e=args.e, hbar=args.hbar, tau=args.tau,
                tol=args.tol, threads=args.threads)
    if args.out == "-":
        write_scan_csv(grid, sys.stdout)
    else:
        path = Path(args.out)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            write_scan_csv(grid, fh)
        print(f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulation runs


def normalize_config(cfg: dict) -> dict:
    if "case" not in cfg:
        raise UsageError("config needs a 'case' key (hump, tidal or expansion)")
    case = cfg["case"]
    if case not in CASE_DEFAULTS:
        raise UsageError(f"unknown case {case!r}")
    out = {"case": case, **CASE_DEFAULTS[case], "threads": 1, "backend": None}
    unknown = set(cfg) - set(out)
    if unknown:
        raise UsageError(f"unknown config keys for {case}: {sorted(unknown)}")
    out.update(cfg)
    if out["backend"] is None:
        out["backend"] = kernels.BACKEND
    return out


def _hbar(cfg: dict) -> float:
    return {"hump": benchmarks.HUMP_H_OUT, "tidal": float(benchmarks.tidal_H(0.0)),
            "expansion": benchmarks.EXP_H_OUT}[cfg["case"]]


def _build(cfg: dict):
    c = cfg["case"]
    if c == "hump":
        return benchmarks.hump_case(cfg["g"], cfg["lattice"], cfg["lambda"])
    if c == "tidal":
        return benchmarks.tidal_case(cfg["lattice"], cfg["g"], cfg["lambda"], initial=cfg["initial"])
    return benchmarks.expansion_case(cfg["g"], cfg["lambda"])


def run_case(cfg: dict, out_dir: Path) -> tuple[dict, int]:
    """Run a normalized config, write CSVs and a manifest, return (manifest, exit code)."""
    cfg = normalize_config(cfg)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = datetime.now(timezone.utc).isoformat()
    sim_cfg = _build(cfg)
    try:
        stab = verify_stability(sim_cfg.spec, _hbar(cfg), sim_cfg.tau_hat).as_dict()
    except (SingularScalingError, ValueError) as exc:
        stab = {"verdict": "Error", "reasons": [str(exc)]}

    kw = {"threads": cfg["threads"], "output_every": cfg["output_every"], "backend": cfg["backend"]}
    outputs = {}
    case = cfg["case"]
    if case == "hump":
        res = benchmarks.run_hump(cfg["g"], cfg["lattice"], cfg["lambda"], max_iterations=cfg["max_iterations"],
                                  threshold=cfg["threshold"], **kw)
        ok = res.converged
        final = res.final
        if ok:
            outputs["profile"] = output.write_profile_csv(
                out_dir / "profile.csv",
                {"x": res.x, "h_numeric": res.h_numeric, "h_analytic": res.h_analytic, "q": res.q_profile},
            )
    elif case == "tidal":
        try:
            res = benchmarks.run_tidal(cfg["lattice"], cfg["t_end"], g=cfg["g"], lam=cfg["lambda"],
                                       initial=cfg["initial"], **kw)
        except DivergenceDetected as exc:
            manifest = {"config": cfg, "version": __version__, "started": started,
                        "finished": datetime.now(timezone.utc).isoformat(), "stability": stab,
                        "result": {"status": "diverged", "divergence": str(exc)},
                        "outputs": {"manifest": str(out_dir / "manifest.json")}}
            output.write_manifest(out_dir / "manifest.json", manifest)
            return manifest, EXIT_NEGATIVE
        ok = True
        final = res.final
        outputs["profile"] = output.write_profile_csv(
            out_dir / "profile.csv",
            {"x": res.x, "h_numeric": res.h_numeric, "h_analytic": res.h_analytic,
             "u_numeric": res.u_numeric, "u_analytic": res.u_analytic},
        )
    else:
        res = benchmarks.run_expansion(cfg["g"], cfg["lambda"], max_iterations=cfg["max_iterations"],
                                       threshold=cfg["threshold"], **kw)
        ok = res.converged
        final = res.final

    grid = sim_cfg.grid
    if case == "tidal":
        x = np.arange(grid.nx) * grid.dx
        y = np.arange(grid.ny) * grid.dx
    else:
        x, y = grid.coordinates()
    outputs["snapshot"] = output.write_snapshot_csv(
        out_dir / "snapshot.csv", x, y, final.h, final.ux, final.uy, grid.active_mask
    )
    manifest = {
        "config": cfg,
        "version": __version__,
        "backend": cfg["backend"],
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
        "stability": stab,
        "result": res.summary(),
        "error_reports": [r.as_dict() for r in res.reports],
        "outputs": {k: str(v) for k, v in outputs.items()},
    }
    if hasattr(final, "divergence") and final.divergence:
        manifest["result"]["divergence"] = final.divergence
    manifest["outputs"]["manifest"] = str(out_dir / "manifest.json")
    output.write_manifest(out_dir / "manifest.json", manifest)
    return manifest, EXIT_OK if ok else EXIT_NEGATIVE


def _report(manifest: dict) -> None:
    print(json.dumps(output._clean(manifest["result"]), indent=2))
    print(f"manifest: {manifest['outputs']['manifest']}")


def cmd_sim_run(args) -> int:
    cfg = output.read_config(args.config)
    for key in ("g", "lattice", "threads"):
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    if args.lam is not None:
        cfg["lambda"] = args.lam
    manifest, code = run_case(cfg, Path(args.out) if args.out else output.default_output_dir())
    _report(manifest)
    return code


def cmd_bench_case(args) -> int:
    cfg = {"case": args.case, "threads": args.threads}
    if args.g is not None:
        cfg["g"] = args.g
    if getattr(args, "lattice", None) is not None:
        cfg["lattice"] = args.lattice
    if args.lam is not None:
        cfg["lambda"] = args.lam
    out = Path(args.out) if args.out else output.default_output_dir() / args.case
    manifest, code = run_case(cfg, out)
    _report(manifest)
    return code


def cmd_bench_table(args) -> int:
    rows = benchmarks.reproduce_table(args.table, workers=args.workers, threads=args.threads,
                                      max_iterations=args.max_iterations)
    out_dir = Path(args.out) if args.out else output.default_output_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"table_{args.table.upper()}.csv"
    with path.open("w", newline="") as fh:
        benchmarks.write_table_csv(rows, fh)
    with open(path) as fh:
        sys.stdout.write(fh.read())
    print(f"wrote {path}")
    return EXIT_OK if all(r.classification_match for r in rows) else EXIT_NEGATIVE


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="swlbm", description="Shallow-water lattice Boltzmann toolkit")
    p.add_argument("--version", action="version", version=f"swlbm {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    st = sub.add_parser("stability", help="stability-structure analysis").add_subparsers(dest="action", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", choices=sorted(MODELS), required=True)
    common.add_argument("--e", type=_positive("e"), default=1.0)
    common.add_argument("--hbar", type=_positive("hbar"), default=1.0)
    common.add_argument("--tau", type=_positive("tau"), default=1.0)
    common.add_argument("--tol", type=_positive("tol"), default=1e-10)

    ck = st.add_parser("check", parents=[common], help="verify one parameter set")
    ck.add_argument("--g", type=_positive("g"), required=True)
    ck.add_argument("--lambda", dest="lam", type=float)
    ck.add_argument("--json", action="store_true")
    ck.set_defaults(func=cmd_stability_check)

    sc = st.add_parser("scan", parents=[common], help="verdict map over g (and lambda)")
    sc.add_argument("--g-grid", required=True)
    sc.add_argument("--lambda-grid")
    sc.add_argument("--threads", type=int, default=1)
    sc.add_argument("--out", default="-")
    sc.set_defaults(func=cmd_stability_scan)

    sim = sub.add_parser("sim", help="run a configured simulation").add_subparsers(dest="action", required=True)
    run = sim.add_parser("run")
    run.add_argument("--config", required=True)
    run.add_argument("--g", type=_positive("g"))
    run.add_argument("--lattice")
    run.add_argument("--lambda", dest="lam", type=float)
    run.add_argument("--threads", type=int)
    run.add_argument("--out")
    run.set_defaults(func=cmd_sim_run)

    bench = sub.add_parser("bench", help="benchmark cases and table reproduction").add_subparsers(
        dest="case", required=True
    )
    for case in ("hump", "tidal", "expansion"):
        b = bench.add_parser(case)
        b.add_argument("--g", type=_positive("g"))
        if case != "expansion":
            b.add_argument("--lattice")
        b.add_argument("--lambda", dest="lam", type=float)
        b.add_argument("--threads", type=int, default=1)
        b.add_argument("--out")
        b.set_defaults(func=cmd_bench_case)
    tb = bench.add_parser("table")
    tb.add_argument("table", choices=sorted(benchmarks.PAPER_TABLES) + [t.lower() for t in benchmarks.PAPER_TABLES])
    tb.add_argument("--workers", type=int)
    tb.add_argument("--threads", type=int, default=1)
    tb.add_argument("--max-iterations", type=int)
    tb.add_argument("--out")
    tb.set_defaults(func=cmd_bench_table)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (UsageError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
