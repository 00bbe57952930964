"""Command line front end.

Exit codes: 0 verified, 1 refuted or failed stage, 2 undetermined (or nothing
to export), 3 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .driver import (
    ConfigError,
    export_figures,
    load_config,
    recheck_certificate,
    run_pipeline,
    write_certificate,
)
from .verdict import Verdict

EXIT_USAGE = 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="homoclinic", description="Validated homoclinic-orbit proofs for Lorenz-84.")
    p.add_argument("--verbose", "-v", action="store_true", help="print per-stage progress")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out=True):
        sp.add_argument("--config", required=True, help="JSON proof configuration")
        sp.add_argument("--subdivision", type=int, default=None, help="maximum subdivision level for rate and cone bounds")
        if out:
            sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--verbose", "-v", action="store_true", default=argparse.SUPPRESS)

    common(sub.add_parser("fixed-point", help="enclose the equilibrium over the parameter range"), out=False)
    common(sub.add_parser("eigen", help="enclose the spectrum and the saddle quantity"), out=False)
    common(sub.add_parser("manifold", help="isolating blocks, rate and cone conditions"), out=False)
    pr = sub.add_parser("prove", help="run all stages and write a certificate")
    common(pr)
    pr.add_argument("--export-figures", action="store_true", help="also write CSV plot data")
    rc = sub.add_parser("recheck", help="re-verify a certificate without integrating")
    rc.add_argument("certificate")
    rc.add_argument("--config", default=None, help="check the certificate was made from this config")
    rc.add_argument("--verbose", "-v", action="store_true", default=argparse.SUPPRESS)
    ex = sub.add_parser("export", help="write CSV plot data for a proof")
    common(ex)
    return p


def _code(v: Verdict) -> int:
    return v.exit_code


def _summary(pipe, verdict: Verdict) -> dict:
    out = {"verdict": verdict.value, "failed_stage": pipe.failed_stage}
    for name, data in pipe.stages.items():
        out[name] = data["verdict"]
    return out


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else 0
    log = (lambda m: print(m, file=sys.stderr)) if getattr(args, "verbose", False) else None

    if args.command == "recheck":
        rep = recheck_certificate(args.certificate, args.config)
        for msg in rep.problems:
            print(msg)
        print("certificate OK" if rep.ok else "certificate REJECTED")
        return 0 if rep.ok else 1

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.subdivision is not None:
        if args.subdivision < 0:
            print("--subdivision must be >= 0", file=sys.stderr)
            return EXIT_USAGE
        cfg.subdivision = args.subdivision
    out_dir = Path(getattr(args, "out", None) or cfg.out_dir)

    upto = {"fixed-point": "fixed_point", "eigen": "eigen", "manifold": "cones"}.get(args.command, "shooting")
    pipe = run_pipeline(cfg, upto=upto, log=log)
    stage_v = Verdict.combine(*pipe.verdicts.values()) if pipe.verdicts else Verdict.UNDETERMINED
    if args.command == "fixed-point":
        d = pipe.stages["fixed_point"]
        print(json.dumps({"verdict": d["verdict"], "enclosure": d["original"]["enclosure"]}, indent=1))
        return _code(stage_v)
    if args.command == "eigen":
        print(json.dumps(_summary(pipe, stage_v) | {"eigen": pipe.stages.get("eigen")}, indent=1))
        return _code(stage_v)
    if args.command == "manifold":
        print(json.dumps(_summary(pipe, stage_v), indent=1))
        return _code(stage_v)

    cert = pipe.certificate()
    if args.command == "prove":
        path = out_dir / cfg.certificate
        write_certificate(cert, path)
        print(json.dumps(_summary(pipe, pipe.verdict), indent=1))
        print(f"certificate written to {path}")
        if args.export_figures:
            files = export_figures(pipe, out_dir)
            print(f"{len(files)} figure files written")
        return _code(pipe.verdict)

    # export
    files = export_figures(pipe, out_dir)
    if not files:
        print("nothing to export: the pipeline did not reach the shooting stage", file=sys.stderr)
        return 2
    for f in files:
        print(f)
    return 0


if __name__ == "__main__":
    sys.exit(main())
