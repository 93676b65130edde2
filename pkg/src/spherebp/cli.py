"""Command-line front end.

    spherebp verify     [--theorem T --n N ...]   MC identity check (default suite without --theorem)
    spherebp oracle     --theorem T --n N ...     closed form vs finite-difference Jacobian
    spherebp roundtrip  --theorem T --n N ...     reconstruct(decompose(x)) == x
    spherebp constants  --n N                     sigma_d and Grassmannian masses
    spherebp sample     --theorem T --n N ...     importance-weight diagnostics

Exit status: 0 all checks pass, 1 any failure, 2 usage error, 3 report not writable.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import InvalidInputError
from .measures import (
    RandomStream,
    grassmannian_measure,
    sample_param,
    sphere_surface_area,
)
from .theorems import TheoremConfig, TheoremId
from .verification import (
    DEFAULT_THRESHOLD,
    FD_STEP,
    ComparisonVerdict,
    Integrand,
    IntegrandKind,
    SuiteCase,
    default_proposal,
    default_suite,
    oracle_errors,
    roundtrip_errors,
    run_suite,
)

COMMANDS = ("verify", "oracle", "roundtrip", "constants", "sample")
DEFAULT_SAMPLES = 10 ** 6
DEFAULT_SEED = 42
# oracle and roundtrip count parameter points, not MC draws
DEFAULT_POINTS = {"oracle": 100, "roundtrip": 1000}
ORACLE_TOL = 1e-5
ROUNDTRIP_TOL = 1e-9


@dataclass
class RunConfig:
    command: str
    theorem: TheoremConfig | None = None
    samples: int = DEFAULT_SAMPLES
    seed: int = DEFAULT_SEED
    integrand: Integrand = field(default_factory=Integrand)
    threshold: float = DEFAULT_THRESHOLD
    out: str | None = None
    n: int | None = None
    workers: int = 1
    h: float = FD_STEP

    def echo(self) -> dict:
        out = {"command": self.command, "samples": self.samples, "seed": self.seed,
               "integrand": self.integrand.echo(), "threshold": self.threshold}
        if self.theorem is not None:
            out["theorem"] = self.theorem.echo()
        if self.command == "oracle":
            out["h"] = self.h
        return out


def _positive_int(text: str) -> int:
    try:
        value = int(float(text)) if "e" in text.lower() else int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--theorem", help="one of: " + ", ".join(t.value for t in TheoremId))
    common.add_argument("--n", type=int)
    common.add_argument("--k", type=int)
    common.add_argument("--m", type=int)
    common.add_argument("--q", type=int, default=0)
    common.add_argument("--r0", type=float, default=0.0)
    common.add_argument("--samples", type=_positive_int,
                        help="MC draws (default 1e6); parameter points for oracle/roundtrip")
    common.add_argument("--seed", type=int, help="default 42, or $BP_SEED")
    common.add_argument("--integrand", default="gaussian",
                        choices=[k.value for k in IntegrandKind])
    common.add_argument("--radius", type=float, default=1.0, help="ball integrand radius")
    common.add_argument("--exponent", type=float, default=1.0, help="volume-power exponent")
    common.add_argument("--cutoff", type=float, default=1.0, help="volume-power ball cutoff")
    common.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    common.add_argument("--out", help="write the JSON report here")
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--h", type=float, default=FD_STEP, help="finite-difference step")

    parser = argparse.ArgumentParser(prog="spherebp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def _seed(flag: int | None) -> int:
    if flag is not None:
        return flag
    env = os.environ.get("BP_SEED")
    if env is None or env.strip() == "":
        return DEFAULT_SEED
    return int(env)


def parse_args(argv=None) -> RunConfig:
    """Validate argv into a RunConfig; usage errors exit with status 2."""
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        seed = _seed(ns.seed)
    except ValueError:
        parser.error("BP_SEED must be an integer")
    if ns.threshold <= 0:
        parser.error("--threshold must be positive")
    if ns.workers < 1:
        parser.error("--workers must be >= 1")
    if ns.h <= 0:
        parser.error("--h must be positive")

    try:
        integrand = Integrand(IntegrandKind(ns.integrand), radius=ns.radius,
                              exponent=ns.exponent, cutoff=ns.cutoff)
    except ValueError as exc:
        parser.error(str(exc))
    if min(ns.radius, ns.cutoff) <= 0 or ns.exponent < 0:
        parser.error("--radius and --cutoff must be positive, --exponent non-negative")

    default_samples = DEFAULT_POINTS.get(ns.command, DEFAULT_SAMPLES)
    cfg = RunConfig(command=ns.command, samples=ns.samples or default_samples, seed=seed,
                    integrand=integrand, threshold=ns.threshold, out=ns.out, n=ns.n,
                    workers=ns.workers, h=ns.h)

    if ns.command == "constants":
        if ns.n is None or ns.n < 1:
            parser.error("constants needs --n >= 1")
        return cfg

    if ns.theorem is None:
        if ns.command != "verify":
            parser.error(f"{ns.command} needs --theorem")
        if any(v is not None for v in (ns.n, ns.k, ns.m)):
            parser.error("--n/--k/--m need --theorem")
        return cfg
    if ns.n is None:
        parser.error("--theorem needs --n")

    try:
        theorem = TheoremId.parse(ns.theorem)
        cfg.theorem = TheoremConfig(theorem, n=ns.n, k=ns.k, m=ns.m, q=ns.q, r0=ns.r0)
    except InvalidInputError as exc:
        parser.error(str(exc))
    if (ns.command in ("verify", "sample") and not theorem.on_sphere
            and integrand.kind is IntegrandKind.CONSTANT_ON_SPHERE):
        parser.error("the constant integrand is only integrable on the sphere")
    if ns.command == "oracle" and not cfg.theorem.chart_free:
        parser.error(f"{theorem.value} with {cfg.theorem.echo()} has a Grassmannian factor; "
                     "the FD oracle needs a chart-free configuration")
    return cfg


# ---------------------------------------------------------------------------
# reports

def _finite(x):
    """JSON has no inf/nan; encode them as strings."""
    if x is None or (isinstance(x, float) and math.isfinite(x)):
        return x
    if isinstance(x, float):
        return str(x)
    return x


def verdict_record(v: ComparisonVerdict) -> dict:
    rec = {
        "theorem": v.config.get("theorem", v.label.split("(")[0]),
        "label": v.label,
        "config": v.config,
        "lhs": v.lhs.to_dict() if v.lhs is not None else None,
        "rhs": v.rhs.to_dict() if v.rhs is not None else None,
        "z_score": _finite(v.z_score),
        "pass": v.passed,
        "wall_time": v.wall_time,
    }
    if v.reason:
        rec["reason"] = v.reason
    return rec


def build_report(verdicts, config: dict | None = None) -> dict:
    cases = [verdict_record(v) for v in verdicts]
    passed = sum(c["pass"] for c in cases)
    return {"version": __version__, "config": config or {}, "cases": cases,
            "summary": {"passed": passed, "failed": len(cases) - passed}}


def emit_report(verdicts, path: str | None, config: dict | None = None, stream=None) -> int:
    """Write the JSON report to ``path``, a summary to ``stream``; return the exit status."""
    stream = sys.stdout if stream is None else stream
    report = build_report(verdicts, config)
    if path is not None:
        with open(path, "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    for case in report["cases"]:
        status = "PASS" if case["pass"] else "FAIL"
        z = case["z_score"]
        ztxt = f"z={z:+.2f}" if isinstance(z, float) else f"z={z}"
        extra = f"  ({case['reason']})" if "reason" in case else ""
        stream.write(f"{status} {case['label']} {ztxt}{extra}\n")
    s = report["summary"]
    stream.write(f"{s['passed']} passed, {s['failed']} failed\n")
    return 0 if s["failed"] == 0 else 1


def _write_json(doc: dict, path: str | None) -> None:
    if path is not None:
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")


# ---------------------------------------------------------------------------
# commands

def cmd_verify(cfg: RunConfig) -> int:
    if cfg.theorem is None:
        cases = default_suite(cfg.samples)
    else:
        cases = [SuiteCase(cfg.theorem, cfg.integrand, cfg.samples)]
    verdicts = run_suite(cases, seed=cfg.seed, threshold=cfg.threshold, workers=cfg.workers)
    return emit_report(verdicts, cfg.out, cfg.echo())


def cmd_oracle(cfg: RunConfig) -> int:
    errors = oracle_errors(cfg.theorem, cfg.samples, RandomStream(cfg.seed).generator(), cfg.h)
    ok = bool(errors.max() <= ORACLE_TOL)
    doc = {"version": __version__, "config": cfg.echo(), "points": int(errors.size),
           "max_rel_error": float(errors.max()), "median_rel_error": float(np.median(errors)),
           "tolerance": ORACLE_TOL, "pass": ok}
    _write_json(doc, cfg.out)
    print(f"{'PASS' if ok else 'FAIL'} oracle {cfg.theorem.echo()} points={errors.size} "
          f"max rel error {errors.max():.3e}")
    return 0 if ok else 1


def cmd_roundtrip(cfg: RunConfig) -> int:
    errors = roundtrip_errors(cfg.theorem, cfg.samples, RandomStream(cfg.seed).generator())
    ok = bool(errors.max() <= ROUNDTRIP_TOL)
    doc = {"version": __version__, "config": cfg.echo(), "tuples": int(errors.size),
           "max_abs_error": float(errors.max()), "tolerance": ROUNDTRIP_TOL, "pass": ok}
    _write_json(doc, cfg.out)
    print(f"{'PASS' if ok else 'FAIL'} roundtrip {cfg.theorem.echo()} tuples={errors.size} "
          f"max abs error {errors.max():.3e}")
    return 0 if ok else 1


def constants_table(n: int) -> dict:
    return {
        "sigma": {str(d): sphere_surface_area(d) for d in range(1, n + 1)},
        "grassmannian": {str(k): grassmannian_measure(k, n) for k in range(n + 1)},
    }


def cmd_constants(cfg: RunConfig) -> int:
    n = cfg.n
    table = constants_table(n)
    print(f"sphere surface areas sigma_d = |S^(d-1)|, d = 1..{n}")
    for d, v in table["sigma"].items():
        print(f"  sigma_{d:<3} {v:.15g}")
    print(f"Grassmannian masses ||G(k,{n})||")
    for k, v in table["grassmannian"].items():
        print(f"  G({k},{n}){'':<4} {v:.15g}")
    _write_json({"version": __version__, "n": n, **table}, cfg.out)
    return 0


def cmd_sample(cfg: RunConfig) -> int:
    """Importance weights of the parameter sampler: positivity, spread, effective size."""
    proposal = default_proposal(cfg.theorem, cfg.integrand)
    stream = RandomStream(cfg.seed)
    chunk = 1 << 16
    total, s1, s2, wmin, wmax, bad = 0, 0.0, 0.0, math.inf, 0.0, 0
    j = 0
    while total < cfg.samples:
        size = min(chunk, cfg.samples - total)
        _, w = sample_param(cfg.theorem, proposal, stream.generator(2, j), size)
        w = np.asarray(w, dtype=float)
        ok = np.isfinite(w) & (w > 0)
        bad += int((~ok).sum())
        w = w[ok]
        s1 += float(w.sum())
        s2 += float((w * w).sum())
        if w.size:
            wmin, wmax = min(wmin, float(w.min())), max(wmax, float(w.max()))
        total += size
        j += 1
    ess = s1 * s1 / s2 if s2 > 0 else 0.0
    doc = {"version": __version__, "config": cfg.echo(), "draws": total,
           "weight_mean": s1 / total, "weight_min": _finite(wmin), "weight_max": wmax,
           "effective_sample_size": ess, "invalid_weights": bad, "pass": bad == 0}
    _write_json(doc, cfg.out)
    print(f"{'PASS' if bad == 0 else 'FAIL'} sample {cfg.theorem.echo()} draws={total} "
          f"mean weight {s1 / total:.6g} range [{wmin:.3g}, {wmax:.3g}] ESS {ess:.0f}")
    return 0 if bad == 0 else 1


HANDLERS = {
    "verify": cmd_verify,
    "oracle": cmd_oracle,
    "roundtrip": cmd_roundtrip,
    "constants": cmd_constants,
    "sample": cmd_sample,
}


def main(argv=None) -> int:
    cfg = parse_args(argv)
    if cfg.out is not None:
        target = os.path.dirname(os.path.abspath(cfg.out))
        if os.path.isdir(cfg.out) or not os.access(target, os.W_OK):
            print(f"spherebp: cannot write report to {cfg.out!r}", file=sys.stderr)
            return 3
    try:
        return HANDLERS[cfg.command](cfg)
    except OSError as exc:
        print(f"spherebp: cannot write report: {exc}", file=sys.stderr)
        return 3
    except InvalidInputError as exc:
        print(f"spherebp: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
