"""Command-line interface.

Exit codes: 0 success, 1 internal error, 2 usage or configuration error,
3 infeasible model, 4 verification failure, 5 success but a solver limit
was hit (result not proven optimal).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import ilp
from .cpa import FdcModel
from .ct_assign import AssignmentError
from .ct_wire import DelayTable
from .flow import (STRATEGIES, FlowConfig, FlowResult, fit_timing, generate_adder,
                   generate_multiplier, pareto_front, sweep_point)
from .netlist import GateLibrary, GateNetlist, emit_verilog, read_verilog, report
from .verify import check_equivalence

log = logging.getLogger("mulgen")

EXIT_OK, EXIT_INTERNAL, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_VERIFY, EXIT_LIMIT = range(6)


class ConfigError(ValueError):
    pass


CONFIG_KEYS = {"delays", "fdc", "area", "gate_delay", "effort", "solver_path", "time_limit",
               "strategy", "eps", "assign", "wiring"}


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"bad config {path}: {e}") from None
    unknown = set(data) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return data


def build_config(args, file_cfg: dict) -> FlowConfig:
    """Config file first, then flags on top."""
    try:
        delays = DelayTable.from_dict(file_cfg.get("delays", {}))
        fdc = FdcModel.from_dict({**FdcModel().to_dict(), **file_cfg.get("fdc", {})})
        lib = GateLibrary.from_dict({"area": file_cfg.get("area", {}),
                                     "delay": file_cfg.get("gate_delay", {}),
                                     "effort": file_cfg.get("effort", 0.0)})
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad config value: {e}") from None
    backend, solver_path = "internal", file_cfg.get("solver_path")
    solver = getattr(args, "solver", None) or "internal"
    if solver.startswith("external"):
        backend = "external"
        _, _, path = solver.partition(":")
        solver_path = path or solver_path
    elif solver in ("internal", "bnb"):
        backend = solver
    else:
        raise ConfigError(f"unknown solver {solver!r}; use internal, bnb or external:<path>")
    pick = lambda flag, key, default: (  # noqa: E731
        flag if flag is not None else file_cfg.get(key, default))
    try:
        return FlowConfig(
            strategy=pick(getattr(args, "strategy", None), "strategy", "tradeoff"),
            target_delay=getattr(args, "target_delay", None),
            assign=pick(getattr(args, "assign", None), "assign", "auto"),
            wiring=pick(getattr(args, "wiring", None), "wiring", "auto"),
            backend=backend,
            solver_path=solver_path,
            time_limit=float(pick(getattr(args, "time_limit", None), "time_limit", 3600.0)),
            seed=getattr(args, "seed", 0) or 0,
            eps=float(file_cfg.get("eps", 1.5)),
            stage_max=getattr(args, "stage_max", None),
            delays=delays, fdc=fdc, library=lib)
    except ValueError as e:
        raise ConfigError(str(e)) from None


def write_design(res: FlowResult, out_dir: Path, name: str) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    d = res.design
    nl = d.netlist
    nl.meta["design"] = {
        "assignment": d.assignment.to_dict() if d.assignment else None,
        "wiring": d.wiring.to_dict() if d.wiring else None,
        "prefix_graph": d.graph.to_dict(),
        "cpa_offset": d.cpa_offset,
    }
    files = [out_dir / f"{name}.v", out_dir / f"{name}.json", out_dir / f"{name}.report.json"]
    files[0].write_text(emit_verilog(nl, name))
    files[1].write_text(nl.to_json())
    files[2].write_text(json.dumps(res.summary(), indent=1, sort_keys=True) + "\n")
    return files


def _finish(res: FlowResult, args, name: str) -> int:
    files = write_design(res, Path(args.out_dir), name)
    for f in files:
        print(f"wrote {f}")
    print(f"area {res.report.area:g}  delay {res.report.delay:g}")
    for n in res.notes:
        print(f"note: {n}")
    if not args.no_verify:
        rep = check_equivalence(res.design.netlist, "auto", n=args.vectors, seed=args.seed)
        print(f"verify: {'pass' if rep.passed else 'FAIL'} ({rep.mode}, {rep.vectors} vectors)")
        if not rep.passed:
            print(json.dumps(rep.counterexample))
            return EXIT_VERIFY
    if res.solver_limited:
        print("warning: solver limit reached; result not proven optimal", file=sys.stderr)
        return EXIT_LIMIT
    return EXIT_OK


def cmd_gen_mult(args, cfg: FlowConfig) -> int:
    res = generate_multiplier(args.width, 0, cfg, args.name or f"mult{args.width}")
    return _finish(res, args, args.name or f"mult{args.width}")


def cmd_gen_mac(args, cfg: FlowConfig) -> int:
    acc = args.acc_width if args.acc_width is not None else 2 * args.width
    name = args.name or f"mac{args.width}_{acc}"
    res = generate_multiplier(args.width, acc, cfg, name)
    return _finish(res, args, name)


def cmd_gen_adder(args, cfg: FlowConfig) -> int:
    arrivals = None
    if args.arrivals:
        arrivals = [float(x) for x in args.arrivals.split(",")]
        if len(arrivals) != args.width:
            raise ConfigError(f"{len(arrivals)} arrival times for width {args.width}")
    name = args.name or f"add{args.width}"
    return _finish(generate_adder(args.width, cfg, arrivals, name), args, name)


def _load_netlist(path: str) -> GateNetlist:
    text = Path(path).read_text()
    if path.endswith(".v"):
        nl = read_verilog(text)
        twin = Path(path).with_suffix(".json")
        if twin.exists():
            nl.meta = json.loads(twin.read_text()).get("meta", {})
        return nl
    return GateNetlist.from_json(text)


def cmd_verify(args, cfg: FlowConfig) -> int:
    nl = _load_netlist(args.design)
    rep = check_equivalence(nl, args.mode, n=args.vectors, seed=args.seed, kind=args.kind)
    print(f"verify {args.design}: {'pass' if rep.passed else 'FAIL'} "
          f"({rep.mode}, {rep.vectors} vectors, {rep.mismatches} mismatches)")
    if not rep.passed:
        text = rep.to_json()
        if args.counterexample:
            Path(args.counterexample).write_text(text)
        print(text, end="")
        return EXIT_VERIFY
    return EXIT_OK


def cmd_report(args, cfg: FlowConfig) -> int:
    nl = _load_netlist(args.design)
    lib = cfg.library
    if args.effort is not None:
        lib = GateLibrary(dict(lib.delay), dict(lib.area), args.effort)
    print(json.dumps(report(nl, lib).to_dict(), indent=1, sort_keys=True))
    return EXIT_OK


def cmd_sweep(args, cfg: FlowConfig) -> int:
    widths = [int(w) for w in args.widths.split(",")]
    strategies = args.strategies.split(",")
    bad = [s for s in strategies if s not in STRATEGIES]
    if bad:
        raise ConfigError(f"unknown strategies {bad}")
    jobs = []
    for w in widths:
        acc = (args.acc_width if args.acc_width is not None else 2 * w) if args.kind == "mac" else 0
        jobs += [(args.kind, w, acc, s, cfg) for s in strategies]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            rows = list(pool.map(sweep_point, jobs))
    else:
        rows = [sweep_point(j) for j in jobs]
    for w in widths:
        sub = [r for r in rows if r["width"] == w]
        for r, p in zip(sub, pareto_front([(r["area"], r["delay"]) for r in sub])):
            r["pareto"] = int(p)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "sweep.csv"
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    print(f"wrote {path} ({len(rows)} points)")
    if args.plot:
        _plot_sweep(rows, out / "sweep.png")
        print(f"wrote {out / 'sweep.png'}")
    return EXIT_OK


def _plot_sweep(rows, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    fig, ax = plt.subplots(figsize=(5, 4))
    for w in sorted({r["width"] for r in rows}):
        sub = [r for r in rows if r["width"] == w]
        ax.scatter([r["delay"] for r in sub], [r["area"] for r in sub], label=f"{w} bit")
        for r in sub:
            ax.annotate(r["strategy"], (r["delay"], r["area"]), fontsize=7)
    ax.set_xlabel("delay")
    ax.set_ylabel("area")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def cmd_fit_timing(args, cfg: FlowConfig) -> int:
    res = fit_timing(args.count, args.seed, args.effort, cfg.library)
    k, b, r2_d, mape_d = res.depth_only
    out = {
        "adders": res.adders,
        "samples": res.samples,
        "effort": args.effort,
        "fdc": res.fdc.to_dict(),
        "depth_only": {"k": k, "b": b, "r2": r2_d, "mape": mape_d},
    }
    path = Path(args.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    (path / "fdc_fit.json").write_text(json.dumps(out, indent=1, sort_keys=True) + "\n")
    f = res.fdc
    (path / "fdc.toml").write_text(
        "[fdc]\n" + "".join(f"{n} = {getattr(f, n)!r}\n" for n in ("k0", "k1", "k2", "k3", "b")))
    print(f"FDC fit: R2 {f.r2:.4f}  MAPE {f.mape:.2f}%   "
          f"depth-only: R2 {r2_d:.4f}  MAPE {mape_d:.2f}%  "
          f"({res.adders} adders, {res.samples} samples)")
    print(f"wrote {path / 'fdc_fit.json'} and {path / 'fdc.toml'}")
    return EXIT_OK


def _gen_flags(p, mac=False):
    p.add_argument("--width", type=int, required=True)
    if mac:
        p.add_argument("--acc-width", type=int, default=None,
                       help="accumulator bits (default 2*width)")
    p.add_argument("--strategy", choices=STRATEGIES, default=None)
    p.add_argument("--target-delay", type=float, default=None)
    p.add_argument("--assign", choices=("auto", "ilp", "greedy"), default=None)
    p.add_argument("--wiring", choices=("auto", "ilp", "greedy", "identity"), default=None)
    p.add_argument("--stage-max", type=int, default=None)
    p.add_argument("--name", default=None)
    _common(p)
    p.add_argument("--no-verify", action="store_true")
    p.add_argument("--vectors", type=int, default=10000,
                   help="random vectors for the post-generation check")


def _common(p):
    p.add_argument("--solver", default=None, help="internal, bnb or external:<path>")
    p.add_argument("--time-limit", type=float, default=None, help="seconds per ILP (default 3600)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default="out")
    p.add_argument("--config", default=None, help="TOML file with delays/fdc/area tables")


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mulgen", description=__doc__.split("\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-mult", help="generate an unsigned multiplier")
    _gen_flags(p)
    p.set_defaults(func=cmd_gen_mult)

    p = sub.add_parser("gen-mac", help="generate a fused multiply-accumulate")
    _gen_flags(p, mac=True)
    p.set_defaults(func=cmd_gen_mac)

    p = sub.add_parser("gen-adder", help="generate a prefix adder")
    _gen_flags(p)
    p.add_argument("--arrivals", default=None, help="comma-separated input arrival times")
    p.set_defaults(func=cmd_gen_adder)

    p = sub.add_parser("verify", help="check an emitted design against arithmetic")
    p.add_argument("design", help="netlist .json (or .v with its .json twin)")
    p.add_argument("--mode", choices=("auto", "exhaustive", "random"), default="auto")
    p.add_argument("--vectors", type=int, default=1_000_000)
    p.add_argument("--kind", choices=("mult", "mac", "add", "ct"), default=None)
    p.add_argument("--counterexample", default=None, help="write a failing vector here")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="area and longest path of an emitted design")
    p.add_argument("design")
    p.add_argument("--effort", type=float, default=None, help="delay per unit fanout")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("sweep", help="area/delay grid over widths and strategies")
    p.add_argument("--widths", default="8,16")
    p.add_argument("--strategies", default=",".join(STRATEGIES))
    p.add_argument("--kind", choices=("mult", "mac", "add"), default="mult")
    p.add_argument("--acc-width", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--plot", action="store_true", help="also write sweep.png")
    _common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fit-timing", help="fit the prefix-adder delay model")
    p.add_argument("--count", type=int, default=60, help="adders in the corpus")
    p.add_argument("--effort", type=float, default=0.5,
                   help="fanout delay per load in the ground truth")
    _common(p)
    p.set_defaults(func=cmd_fit_timing)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = make_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = build_config(args, load_config(args.config))
        return args.func(args, cfg)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except AssignmentError as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ilp.SolverNotFoundError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, IsADirectoryError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
