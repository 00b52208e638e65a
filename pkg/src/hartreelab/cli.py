"""Command line entry point.

    hartreelab run CONFIG [--out DIR] [--jobs N]
    hartreelab report DIR

Exit status: 0 success, 1 an assertion of the experiment failed, 2 bad input
(schema violation, unreadable config, no manifests to report on).
"""
from __future__ import annotations

import argparse
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import ConfigError, load_config
from .decay import regime_table
from .errors import HartreeLabError
from .occupation import BACKEND

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
MANIFEST = "manifest.json"


def _versions() -> dict:
    return {"hartreelab": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "occupation_backend": BACKEND}


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    return str(o)


def cmd_run(args) -> int:
    from .experiments import RUNNERS

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out) if args.out else Path("runs") / cfg.name
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory {out}: {exc.strerror}", file=sys.stderr)
        return EXIT_USAGE
    start = time.perf_counter()
    error = None
    try:
        result = RUNNERS[cfg.kind](cfg, out, jobs=max(1, args.jobs))
    except (HartreeLabError, ValueError) as exc:
        from .experiments import ExperimentResult

        result = ExperimentResult(checks={"completed": False})
        error = f"{type(exc).__name__}: {exc}"
    wall = time.perf_counter() - start
    manifest = {
        "experiment": cfg.kind,
        "name": cfg.name,
        "config": cfg.to_dict(),
        "config_file": str(Path(args.config).resolve()),
        "versions": _versions(),
        "wall_time": wall,
        "checks": result.checks,
        "passed": result.passed,
        "outputs": result.outputs,
        "summary": result.summary,
        "error": error,
    }
    path = out / MANIFEST
    path.write_text(json.dumps(manifest, indent=2, default=_jsonable))
    status = "PASS" if result.passed else "FAIL"
    print(f"{status} {cfg.kind} ({wall:.1f}s) -> {path}")
    if error:
        print(f"error: {error}", file=sys.stderr)
    for name, ok in result.checks.items():
        if not ok:
            print(f"  failed check: {name}", file=sys.stderr)
    return EXIT_OK if result.passed else EXIT_FAIL


def _load_manifests(root: Path) -> list:
    found = []
    for p in sorted(root.rglob(MANIFEST)):
        try:
            m = json.loads(p.read_text())
        except (OSError, json.JSONDecodeError):
            continue
        m["_path"] = str(p.parent)
        found.append(m)
    return found


def _annotated_table(manifests) -> list:
    lambda_c = 1.0
    for m in manifests:
        if m["experiment"] == "regime-sweep":
            lambda_c = m["summary"].get("lambda_c", lambda_c)
    rows = [list(r) for r in regime_table(lambda_c)]
    cells = {"1": [], "2": [(2, 1)], "3.1": [(2, 2)], "3.2": [(2, 3)], "4": [(2, 4)],
             "5": [(1, 2), (1, 3)], "6": [(1, 4)], "3.3": [(3, 3)], "3.4": [(3, 4)]}
    for m in manifests:
        case = m.get("summary", {}).get("case")
        if m["experiment"] != "decay-fit" or case is None:
            continue
        note = f"measured p={m['summary']['exponent']:.3f}" + ("" if m["passed"] else " FAIL")
        for r, c in cells.get(case, []):
            rows[r][c] += f"; {note}"
    return rows


def cmd_report(args) -> int:
    root = Path(args.dir)
    if not root.is_dir():
        print(f"error: {root} is not a directory", file=sys.stderr)
        return EXIT_USAGE
    manifests = _load_manifests(root)
    if not manifests:
        print(f"error: no {MANIFEST} found under {root}", file=sys.stderr)
        return EXIT_USAGE
    ordered = sorted(manifests, key=lambda m: (bool(m["passed"]), m["_path"]))
    n_pass = sum(bool(m["passed"]) for m in manifests)
    lines = [f"# Experiment summary", "", f"{n_pass}/{len(manifests)} pass", "",
             "| status | experiment | name | key numbers | failed checks |", "|---|---|---|---|---|"]
    rows_json = []
    for m in ordered:
        s = m.get("summary", {})
        key = {k: s[k] for k in ("exponent", "r_squared", "slopes", "slopes_vs_pairs", "mass_error",
                                 "tilde_max_odd_mass", "full_odd_mass_mid") if k in s}
        failed = [k for k, v in m.get("checks", {}).items() if not v]
        if m.get("error"):
            failed.append(m["error"])
        status = "PASS" if m["passed"] else "FAIL"
        lines.append(f"| {status} | {m['experiment']} | {m['name']} | "
                     f"{json.dumps(key, default=_jsonable)} | {', '.join(failed)} |")
        rows_json.append({"status": status, "experiment": m["experiment"], "name": m["name"],
                          "path": m["_path"], "key": key, "failed": failed})
    table = _annotated_table(manifests)
    md = [[c.replace("|", "\\|") for c in r] for r in table]
    lines += ["", "## Regime table", "", "| " + " | ".join(md[0]) + " |", "|" + "---|" * len(md[0])]
    lines += ["| " + " | ".join(r) + " |" for r in md[1:]]
    (root / "summary.md").write_text("\n".join(lines) + "\n")
    (root / "summary.json").write_text(json.dumps(
        {"passed": n_pass, "total": len(manifests), "runs": rows_json, "regime_table": table},
        indent=2, default=_jsonable))
    print("\n".join(lines))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hartreelab", description="Hartree dynamics laboratory")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment from a YAML config")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (default runs/<name>)")
    r.add_argument("--jobs", type=int, default=1, help="parallel worker limit")
    r.set_defaults(func=cmd_run)
    s = sub.add_parser("report", help="summarize every manifest under a directory")
    s.add_argument("dir")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
