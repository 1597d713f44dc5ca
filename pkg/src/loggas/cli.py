"""Command-line interface.

Exit codes: 0 success, 1 verification failure, 2 usage error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, constants
from .errors import LogGasError, UnsortedInput

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _float_or_inf(text: str) -> float:
    return math.inf if text.lower() in ("inf", "none") else float(text)


def _provenance(args) -> dict:
    return {"tool": "loggas", "version": __version__, "command": args.command, "seed": args.seed,
            "argv": list(args.argv)}


def _jsonl(args, records) -> str:
    """JSON lines output, opened by a provenance record."""
    lines = [json.dumps({"provenance": _provenance(args)})] + [json.dumps(r) for r in records]
    return "\n".join(lines) + "\n"


def _emit(args, text: str) -> None:
    if args.out and args.command not in ("sample", "screen"):
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# --- sample -------------------------------------------------------------------

def _tridiagonal_chunk(payload):
    from .sampler import EnsembleSpec, sample_indexed

    beta, N, seed, idx = payload
    return sample_indexed(EnsembleSpec(beta=beta, N=N, seed=seed), idx)


def _mcmc_chunk(payload):
    from .sampler import EnsembleSpec, sample_mcmc, sample_rng

    beta, N, seed, idx, steps = payload
    spec = EnsembleSpec(beta=beta, N=N, seed=seed)
    rows, acc = [], []
    for i in idx:
        r = sample_mcmc(spec, steps, sample_rng(seed, i))
        rows.append(r.samples[0])
        acc.append(r.acceptance)
    return np.array(rows), acc


def _chunks(n: int, parts: int) -> list[list[int]]:
    parts = max(1, min(parts, n))
    return [list(range(n))[k::parts] for k in range(parts)]


def cmd_sample(args) -> int:
    from .sampler import measured_support, sample_poisson, sample_rng
    from .store import resolve_store_path, write_store

    out = resolve_store_path(args.out)
    if args.count < 1:
        raise UsageError("--count must be positive")
    if args.poisson:
        if args.R is None:
            raise UsageError("--poisson needs --R")
        configs = [sample_poisson(args.R, sample_rng(args.seed, i)) for i in range(args.count)]
        manifest = {"kind": "poisson", "spec": {"R": args.R, "intensity": 1.0, "seed": args.seed},
                    "count": args.count, "provenance": _provenance(args)}
        write_store(out, manifest, configs=configs)
        return EXIT_OK
    if args.beta is None or args.N is None:
        raise UsageError("sample needs --beta and --N (or --poisson)")
    chunks = _chunks(args.count, args.threads)
    extra = {}
    if args.method == "tridiagonal":
        payloads = [(args.beta, args.N, args.seed, c) for c in chunks]
        results = _map(_tridiagonal_chunk, payloads, args.threads)
        parts = results
    else:
        payloads = [(args.beta, args.N, args.seed, c, args.steps) for c in chunks]
        results = _map(_mcmc_chunk, payloads, args.threads)
        parts = [r[0] for r in results]
        extra["mcmc"] = {"steps": args.steps, "acceptance": float(np.mean(sum((r[1] for r in results), [])))}
    samples = np.empty((args.count, args.N))
    for idx, block in zip(chunks, parts):
        samples[idx] = block
    sup = measured_support(samples.ravel())
    manifest = {
        "kind": "beta",
        "spec": {"beta": args.beta, "N": args.N, "seed": args.seed, "confinement": "quadratic"},
        "method": args.method,
        "count": args.count,
        "support": sup.as_dict(),
        "provenance": _provenance(args),
        **extra,
    }
    write_store(out, manifest, samples=samples)
    return EXIT_OK


def _map(fn, payloads, threads: int):
    if threads <= 1 or len(payloads) == 1:
        return [fn(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, payloads))


# --- energy / field -------------------------------------------------------------

def _read_configs(path):
    from .store import read_configs

    if path is None:
        raise UsageError("--config is required")
    return read_configs(path)


def cmd_energy(args) -> int:
    from .energy import intrinsic_energy, truncation_error

    records = []
    for i, c in enumerate(_read_configs(args.config)):
        rec = {"index": i, **intrinsic_energy(c).as_dict()}
        if args.eta is not None:
            rec["truncation_error"] = truncation_error(c, args.eta)
        records.append(rec)
    _emit(args, _jsonl(args, records))
    return EXIT_OK


def cmd_field(args) -> int:
    from .field import LocalField, Rect, box_flux, energy_rectangle, welec_eta

    modes = [m for m in ("at", "flux", "energy_box") if getattr(args, m) is not None] + (["welec"] if args.welec else [])
    if len(modes) != 1:
        raise UsageError("choose exactly one of --at, --flux, --energy-box, --welec")
    mode = modes[0]
    if mode != "at" and args.eta is None:
        raise UsageError("--eta is required for energies and fluxes")
    records = []
    for i, c in enumerate(_read_configs(args.config)):
        f = LocalField(c, args.eta)
        if mode == "at":
            if len(args.at) != 2:
                raise UsageError("--at expects x,y")
            ex, ey = f(args.at[0], args.at[1])
            rec = {"index": i, "field": [float(ex), float(ey)]}
        elif mode == "welec":
            rec = {"index": i, "welec": welec_eta(c, args.eta, tol=args.tol)}
        else:
            vals = args.flux if mode == "flux" else args.energy_box
            if len(vals) != 4:
                raise UsageError("box expects x0,x1,y0,y1")
            box = Rect(*vals)
            r = box_flux(f, box, tol=args.tol) if mode == "flux" else energy_rectangle(f, box, tol=args.tol)
            rec = {"index": i, mode: r.value, "error": r.error, "evaluations": r.evaluations}
        records.append(rec)
    _emit(args, _jsonl(args, records))
    return EXIT_OK


# --- screening ------------------------------------------------------------------

def _windows(args, R: float):
    from .store import open_store

    if args.config:
        from .pointconf import Window, restrict

        return [restrict(c, Window.centered(R)) if c.carrier != Window.centered(R) else c
                for c in _read_configs(args.config)]
    return open_store(args.store).windows(R)


def cmd_screen(args) -> int:
    from .acceptance import _jsonable
    from .errors import DegenerateInterval, PreconditionViolated
    from .sampler import sample_rng
    from .screening import ScreeningParams, boundary_energy, check_preconditions, screen
    from .store import config_to_json

    if args.out is None:
        raise UsageError("screen needs --out DIR")
    wins = _windows(args, args.R)
    if args.count:
        wins = wins[: args.count]
    if args.M == "auto":
        energies = [boundary_energy(c, args.R, args.s, args.eta) for c in wins]
        M = float(np.quantile(energies, constants.M_AUTO_QUANTILE))
    else:
        M = float(args.M)
    p = ScreeningParams(R=args.R, s=args.s, eta=args.eta, M=M, e_max=args.e_max)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reports, kept = [], []
    for i, c in enumerate(wins):
        rep = {"index": i}
        try:
            pre = check_preconditions(c, p)
            res = screen(c, p, sample_rng(args.seed, i), tol=args.tol, report=pre)
            kept.append(config_to_json(res.config))
            rep.update(status="screened", **res.report)
        except PreconditionViolated as exc:
            rep.update(status="precondition", message=str(exc))
        except DegenerateInterval as exc:
            rep.update(status="degenerate", message=str(exc))
        reports.append(_jsonable(rep))
    header = json.dumps({"provenance": _provenance(args)})
    (out / "screened.jsonl").write_text("\n".join([header] + kept) + "\n")
    summary = {"provenance": _provenance(args), "M": M, "params": {"R": p.R, "s": p.s, "eta": p.eta, "e_max": str(p.e_max)},
               "windows": len(wins), "screened": len(kept), "reports": reports}
    (out / "report.json").write_text(json.dumps(_jsonable(summary), indent=1) + "\n")
    sys.stdout.write(json.dumps({"windows": len(wins), "screened": len(kept), "M": M}) + "\n")
    return EXIT_OK


# --- interpolation -------------------------------------------------------------

def cmd_interpolate(args) -> int:
    from .energy import intrinsic_energy
    from .store import open_store
    from .transport import (assignment_coupling, convexity_certificate, interpolate, interpolation_sandwich, label,
                            unlabel)

    if not 0.0 <= args.t <= 1.0:
        raise UsageError("--t must lie in [0, 1]")
    n = int(round(2 * args.R))
    a = [c for c in open_store(args.store).windows(args.R) if len(c) == n]
    b = [c for c in open_store(args.store_b).windows(args.R) if len(c) == n]
    m = min(len(a), len(b), args.pairs or 10 ** 9)
    if m == 0:
        raise UsageError(f"no windows with exactly {n} points")
    A = np.array([label(c).values for c in a[:m]])
    B = np.array([label(c).values for c in b[:m]])
    perm = assignment_coupling(A, B)
    records = []
    for i in range(m):
        x0, x1 = label(a[i]), label(b[perm[i]])
        cert = convexity_certificate(x0, x1)
        # plain convexity of the energy along the interpolation at time t
        w0, w1 = intrinsic_energy(a[i]).total, intrinsic_energy(b[perm[i]]).total
        wt = intrinsic_energy(unlabel(interpolate(x0, x1, args.t))).total
        chord = (1 - args.t) * w0 + args.t * w1
        records.append({"pair": i, "partner": int(perm[i]), **cert.as_dict(), "t": args.t, "energy_t": wt,
                        "chord_t": chord, "convex_t": wt <= chord + 1e-9,
                        "sandwich": interpolation_sandwich(x0, x1, args.t)})
    _emit(args, _jsonl(args, records))
    return EXIT_OK


# --- statistics ----------------------------------------------------------------

def _blocks(items, size):
    if not size:
        return [items]
    return [items[k:k + size] for k in range(0, len(items), size)]


def _with_gaps(configs, r: int):
    from .pointconf import GapView

    ks = np.arange(-r, r + 1)
    return [c for c in configs if np.all(np.isfinite(GapView(c).gammas(ks)))]


def cmd_stats(args) -> int:
    from .stats import discrepancy_variance_curve, free_energy_report, gain_estimator, gap_distribution_distance
    from .store import open_store
    from .transport import assignment_coupling, label

    rows = []
    Rs = args.Rs or [4, 8, 16, 32]
    store = open_store(args.store)
    if args.estimator == "discrepancy":
        wins = store.windows(max(Rs))
        for b, block in enumerate(_blocks(wins, args.block_size)):
            for r in discrepancy_variance_curve(block, Rs):
                rows.append({**r, "block": b})
    elif args.estimator in ("gain", "gaps"):
        if not args.store_b:
            raise UsageError(f"{args.estimator} needs --store-b")
        other = open_store(args.store_b)
        for R in Rs:
            n = int(round(2 * R))
            a = [c for c in store.windows(R) if len(c) == n]
            b = [c for c in other.windows(R) if len(c) == n]
            m = min(len(a), len(b))
            if m < 2:
                raise UsageError(f"fewer than two windows with {n} points at R={R}")
            for blk, (ba, bb) in enumerate(zip(_blocks(a[:m], args.block_size), _blocks(b[:m], args.block_size))):
                if args.estimator == "gain":
                    perm = assignment_coupling(np.array([label(c).values for c in ba]),
                                               np.array([label(c).values for c in bb]))
                    est = gain_estimator([(ba[i], bb[perm[i]]) for i in range(len(ba))], R, shift=None,
                                         skip_insufficient=True)
                    rows.append({"estimator": "gain", "R": R, "block": blk, "value": est.value,
                                 "stderr": est.stderr, "n": est.n})
                else:
                    ga, gb = _with_gaps(ba, args.r), _with_gaps(bb, args.r)
                    if min(len(ga), len(gb)) < 4:
                        raise UsageError(f"too few windows with {2 * args.r + 1} gaps around 0 at R={R}")
                    d = gap_distribution_distance(ga, gb, r=args.r, split=True,
                                                  rng=np.random.default_rng(args.seed))
                    rows.append({"estimator": "gap_distance", "R": R, "block": blk, "value": d["value"],
                                 "stderr": d["stderr"], "n": min(len(ga), len(gb))})
    elif args.estimator == "free-energy":
        beta = store.manifest.get("spec", {}).get("beta")
        poisson = store.kind == "poisson"
        wins = {R: store.windows(R) for R in Rs}
        for r in free_energy_report(wins, beta, poisson=poisson):
            rows.append({"estimator": "free_energy", "R": r["R"], "block": 0,
                         "value": r["per_volume_wint"], "stderr": r["stderr"], "n": r["n"],
                         "sre": r["sre"], "f_beta": r["f_beta"]})
    buf = io.StringIO()
    buf.write("# provenance: " + json.dumps(_provenance(args)) + "\n")
    fields = ["estimator", "R", "block", "value", "stderr", "n"]
    extra = sorted({k for r in rows for k in r} - set(fields))
    w = csv.DictWriter(buf, fieldnames=fields + extra, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    _emit(args, buf.getvalue())
    return EXIT_OK


# --- verify --------------------------------------------------------------------

REPORT_SCHEMA = {
    "type": "object",
    "required": ["passed", "fast", "version", "checks"],
    "properties": {
        "passed": {"type": "boolean"},
        "fast": {"type": "boolean"},
        "version": {"type": "string"},
        "faults": {"type": "array", "items": {"type": "string"}},
        "provenance": {"type": "object", "required": ["version", "seed", "argv"]},
        "seconds": {"type": "number"},
        "checks": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["name", "lhs", "rhs", "tolerance", "passed"],
                "properties": {
                    "name": {"type": "string"},
                    "lhs": {"type": ["number", "string"]},
                    "rhs": {"type": ["number", "string"]},
                    "tolerance": {"type": "number"},
                    "passed": {"type": "boolean"},
                },
            },
        },
    },
}


def cmd_verify(args) -> int:
    import jsonschema

    from .acceptance import run_all

    t = time.perf_counter()
    faults = frozenset(args.inject_fault or [])
    checks = run_all(fast=args.fast, faults=faults, log=lambda s: print(s, file=sys.stderr))
    report = {
        "passed": all(c.passed for c in checks),
        "fast": bool(args.fast),
        "version": __version__,
        "provenance": _provenance(args),
        "faults": sorted(faults),
        "seconds": time.perf_counter() - t,
        "checks": [c.as_dict() for c in checks],
    }
    jsonschema.validate(report, REPORT_SCHEMA)
    _emit(args, json.dumps(report, indent=1) + "\n")
    return EXIT_OK if report["passed"] else EXIT_VERIFY


# --- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    # abbreviations off: the top-level parser would otherwise reject "--t" as a prefix of --threads/--tol
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="base seed (default 0)")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker processes (default 1)")
    common.add_argument("--tol", type=float, default=argparse.SUPPRESS, help="quadrature tolerance (default 1e-8)")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output file, or directory for sample/screen")

    parser = argparse.ArgumentParser(prog="loggas", parents=[common], allow_abbrev=False,
                                     description="Log-gas windows, electric energies, screening and transport.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", parents=[common], allow_abbrev=False, help="draw an ensemble into a store")
    p.add_argument("--beta", type=float)
    p.add_argument("--N", "--n", dest="N", type=int)
    p.add_argument("--count", "--draws", dest="count", type=int, default=100)
    p.add_argument("--method", "--sampler", dest="method", choices=("tridiagonal", "mcmc"), default="tridiagonal")
    p.add_argument("--steps", type=int, default=1000, help="Metropolis sweeps per draw")
    p.add_argument("--poisson", action="store_true", help="Poisson windows on Lambda_R instead")
    p.add_argument("--R", type=float)

    p = sub.add_parser("energy", parents=[common], allow_abbrev=False, help="intrinsic energy of configurations")
    p.add_argument("--config", required=True)
    p.add_argument("--eta", type=float)

    p = sub.add_parser("field", parents=[common], allow_abbrev=False, help="local field, fluxes and electric energies")
    p.add_argument("--config", required=True)
    p.add_argument("--eta", type=float)
    p.add_argument("--at", type=_floats, metavar="X,Y")
    p.add_argument("--flux", type=_floats, metavar="X0,X1,Y0,Y1")
    p.add_argument("--energy-box", type=_floats, metavar="X0,X1,Y0,Y1")
    p.add_argument("--welec", action="store_true")

    p = sub.add_parser("screen", parents=[common], allow_abbrev=False, help="screen windows of a store or config file")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--store")
    src.add_argument("--config", "--in", dest="config")
    p.add_argument("--R", type=float, required=True)
    p.add_argument("--s", type=float, default=0.125)
    p.add_argument("--eta", type=float, default=constants.SCREENING_ETA)
    p.add_argument("--M", default="auto", help="boundary energy threshold or 'auto'")
    p.add_argument("--e-max", type=_float_or_inf, default=1.0, help="vertical decay threshold ('inf' disables)")
    p.add_argument("--count", type=int, default=0, help="screen at most this many windows")

    p = sub.add_parser("interpolate", parents=[common], allow_abbrev=False, help="couple two stores and certify convexity")
    p.add_argument("--store", "--a", dest="store", required=True)
    p.add_argument("--store-b", "--b", dest="store_b", required=True)
    p.add_argument("--R", type=float, required=True)
    p.add_argument("--t", type=float, default=0.5, help="interpolation time for the energy chord and sandwich")
    p.add_argument("--pairs", type=int, default=0)

    p = sub.add_parser("stats", parents=[common], allow_abbrev=False, help="estimators over a store, as CSV")
    p.add_argument("estimator", choices=("discrepancy", "gain", "gaps", "free-energy"))
    p.add_argument("--store")
    p.add_argument("--store-b")
    p.add_argument("--Rs", type=lambda t: [int(v) for v in _floats(t)])
    p.add_argument("--block-size", type=int, default=0)
    p.add_argument("--r", type=int, default=2, help="gap vector half-width for 'gaps'")

    p = sub.add_parser("verify", parents=[common], allow_abbrev=False, help="run the acceptance checks")
    p.add_argument("--fast", action="store_true")
    p.add_argument("--inject-fault", action="append", choices=("gain-sign",),
                   help="deliberately break a component to exercise the verifier")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(argv)
    args.argv = argv
    for name, default in (("seed", 0), ("threads", 1), ("tol", 1e-8), ("out", None)):
        if not hasattr(args, name):
            setattr(args, name, default)
    handlers = {
        "sample": cmd_sample,
        "energy": cmd_energy,
        "field": cmd_field,
        "screen": cmd_screen,
        "interpolate": cmd_interpolate,
        "stats": cmd_stats,
        "verify": cmd_verify,
    }
    try:
        return handlers[args.command](args)
    except UsageError as exc:
        print(f"loggas: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, UnsortedInput, json.JSONDecodeError) as exc:
        print(f"loggas: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (LogGasError, ValueError) as exc:
        print(f"loggas: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
