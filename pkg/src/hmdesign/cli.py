"""Command-line front end.

Exit codes: 0 success, 2 argument error, 3 semantic input error,
4 infeasible problem, 5 internal numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Callable

from . import __version__
from . import capacity as cap
from .capacity import ChannelSpec, QuadratureSpec
from .constellation import Constellation, average_power, hqam_power, papr
from .coverage import CoverageParams, snr_at_coverage, snr_exceed_prob
from .errors import HMDesignError, Infeasible, NoFeasibleStart, NoLpBits, SizeMismatch
from .io import RunManifest, atomic_write, read_manifest, sha256_text
from .optimizer import ProblemSpec, SolverConfig, optimize_hqam, solve
from .rateregion import (
    convex_hull,
    default_thresholds,
    dominates,
    frontier_csv,
    hm_frontier,
    hqam_frontier,
    td_frontier,
)

log = logging.getLogger("hmdesign")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_NUMERIC = 0, 2, 3, 4, 5

# keys of the parsed namespace that are not part of the run's parameter set
_NON_PARAMS = {"func", "manifest", "command", "verbose"}


class UsageError(Exception):
    """Flag values that parse but are out of range (exit 2)."""


class InputError(Exception):
    """Well-formed input that asks for something impossible (exit 3)."""


class CommandFailed(Exception):
    """Carries a JSON payload and a non-zero exit code."""

    def __init__(self, code: int, payload: dict):
        super().__init__(payload.get("error", ""))
        self.code = code
        self.payload = payload


def _dump(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _solver_config(args) -> SolverConfig:
    return SolverConfig(starts=args.starts, seed=args.seed)


def _quadrature(args) -> QuadratureSpec:
    return QuadratureSpec(nodes_per_dim=args.nodes)


def _problem(args, m_h: int, r_star: float) -> ProblemSpec:
    try:
        return ProblemSpec(
            m_h=m_h, m_l=args.ml, snr_h_db=args.snr_h, snr_l_db=args.snr_l, r_star=r_star,
            power=args.power, papr_limit=args.papr, symmetry=getattr(args, "symmetry", "none"),
        )
    except (ValueError, HMDesignError) as exc:
        raise InputError(str(exc)) from exc


def _infeasible(exc) -> CommandFailed:
    return CommandFailed(EXIT_INFEASIBLE, {"error": "infeasible", "message": str(exc),
                                           "best_r_h": getattr(exc, "best_r_h", None)})


# ---------------------------------------------------------------------------
# commands; each returns (result document, {output path: text})


def cmd_coverage(args):
    params = CoverageParams(args.ps, args.pn, args.radius, args.sigma)
    if args.snr is not None:
        return {"snr_db": args.snr, "fraction": snr_exceed_prob(args.snr, params)}, {}
    fraction = args.fraction if args.fraction is not None else args.percent / 100.0
    if not 0.0 < fraction < 1.0:
        raise UsageError("fraction must be in (0,1)")
    return {"fraction": fraction, "snr_db": snr_at_coverage(fraction, params)}, {}


def _load_constellation(path: str) -> Constellation:
    try:
        return Constellation.from_json(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError, SizeMismatch) as exc:
        raise UsageError(f"cannot read constellation {path}: {exc}") from exc


def cmd_capacity(args):
    c = _load_constellation(args.constellation)
    q = _quadrature(args)
    ch_h = ChannelSpec(args.snr_h, args.power)
    doc = {
        "m_h": c.m_h, "m_l": c.m_l,
        "power": average_power(c), "papr": papr(c),
        "per_bit_hp": [float(x) for x in cap.bit_mis_hp(c, ch_h, q)],
        "per_bit_lp": None,
    }
    doc["r_h"] = float(sum(doc["per_bit_hp"]))
    doc["r_l"] = None
    ch_l = None
    if args.snr_l is not None:
        if c.m_l == 0:
            raise InputError("constellation carries no LP bits, so r_l is undefined")
        ch_l = ChannelSpec(args.snr_l, args.power)
        doc["per_bit_lp"] = [float(x) for x in cap.bit_mis_lp_cond(c, ch_l, q)]
        doc["r_l"] = float(sum(doc["per_bit_lp"]))
    if args.mc_check:
        mc = {"hp": [], "lp": [], "samples": args.mc_samples, "seed": args.seed}
        for i in range(1, c.m_h + 1):
            est, se = cap.mc_bit_mi(c, ch_h, "hp", i, args.mc_samples, args.seed)
            mc["hp"].append({"estimate": est, "stderr": se,
                             "within_3se": abs(est - doc["per_bit_hp"][i - 1]) < 3 * se})
        if ch_l is not None:
            for j in range(1, c.m_l + 1):
                est, se = cap.mc_bit_mi(c, ch_l, "lp", j, args.mc_samples, args.seed)
                mc["lp"].append({"estimate": est, "stderr": se,
                                 "within_3se": abs(est - doc["per_bit_lp"][j - 1]) < 3 * se})
        doc["mc_check"] = mc
    return doc, {}


def cmd_optimize(args):
    spec = _problem(args, args.mh, args.rstar)
    try:
        res = solve(spec, _solver_config(args), _quadrature(args))
    except (Infeasible, NoFeasibleStart) as exc:
        raise _infeasible(exc) from exc
    doc = res.to_dict()
    doc["out"] = args.out
    return doc, {args.out: res.constellation.to_json()}


def cmd_hqam(args):
    spec = _problem(args, 2, args.rstar)
    if args.ml not in (2, 3):
        raise InputError("H-QAM needs --ml 2 or 3")
    try:
        params, res = optimize_hqam(spec, _solver_config(args), _quadrature(args))
    except (Infeasible, NoFeasibleStart) as exc:
        raise _infeasible(exc) from exc
    doc = res.to_dict()
    doc.update({"d1": params.d1, "d2": params.d2, "m_l": params.m_l,
                "power_closed_form": hqam_power(params.d1, params.d2, params.m_l)})
    outputs = {}
    if args.out:
        doc["out"] = args.out
        outputs[args.out] = res.constellation.to_json()
    return doc, outputs


def _scheme_path(out: str, scheme: str) -> str:
    p = Path(out)
    return str(p.with_name(f"{p.stem}_{scheme}{p.suffix or '.csv'}"))


def cmd_region(args):
    if args.points < 2:
        raise UsageError("--points must be at least 2")
    schemes = [s.strip() for s in args.schemes.split(",") if s.strip()]
    bad = set(schemes) - {"hm", "hqam", "td", "hull"}
    if bad or not schemes:
        raise UsageError(f"unknown schemes: {sorted(bad)}")
    base = _problem(args, args.mh, 0.0)
    cfg, q = _solver_config(args), _quadrature(args)
    thresholds = [float(t) for t in default_thresholds(base, args.points, q)]
    frontiers, outputs = {}, {}
    attempted = succeeded = 0
    if "hm" in schemes:
        frontiers["hm"] = hm_frontier(base, thresholds, cfg, q, args.workers)
    if "hqam" in schemes:
        if args.mh != 2 or args.ml not in (2, 3):
            raise InputError("H-QAM frontier needs --mh 2 and --ml 2 or 3")
        frontiers["hqam"] = hqam_frontier(base, thresholds, cfg, q, args.workers)
    for key in ("hm", "hqam"):
        if key in frontiers:
            attempted += len(thresholds)
            succeeded += frontiers[key].meta["solved"]
    td = td_frontier(args.snr_h, args.snr_l, args.power, args.td_grid)
    if "td" in schemes:
        frontiers["td"] = td
    if "hull" in schemes:
        frontiers["hull"] = convex_hull([f for k, f in frontiers.items() if k != "hull"] or [td])

    summary = {"thresholds": thresholds, "margin": args.margin, "files": {}, "witnesses": [],
               "skipped": {}}
    for key, f in frontiers.items():
        path = _scheme_path(args.out, key)
        outputs[path] = frontier_csv(f)
        summary["files"][key] = Path(path).name
        if "skipped" in f.meta:
            summary["skipped"][key] = f.meta["skipped"]
    if "hm" in frontiers:
        for p in frontiers["hm"].points:
            if dominates((p.r_h, p.r_l), td, args.margin):
                summary["witnesses"].append({"r_star": p.r_star, "r_h": p.r_h, "r_l": p.r_l,
                                             "td_r_l": td.interp(p.r_h), "gap": p.r_l - td.interp(p.r_h)})
    summary["solved"] = succeeded
    summary["attempted"] = attempted
    summary_path = _scheme_path(args.out, "summary").rsplit(".", 1)[0] + ".json"
    outputs[summary_path] = _dump(summary)
    if attempted and 2 * succeeded < attempted:
        raise CommandFailed(EXIT_NUMERIC, {"error": "fewer than half of the sweep points solved",
                                           "summary": summary, "_outputs": outputs})
    return summary, outputs


# ---------------------------------------------------------------------------
# parser


def _add_common_solver(p, seed=True):
    p.add_argument("--starts", type=int, default=20)
    if seed:
        p.add_argument("--seed", type=int, default=0)
    p.add_argument("--nodes", type=int, default=48, help="Gauss-Hermite nodes per dimension")


def _add_channel(p, snr_l_required=True):
    p.add_argument("--snr-h", type=float, required=True, dest="snr_h")
    p.add_argument("--snr-l", type=float, required=snr_l_required, dest="snr_l")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hmdesign", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--manifest", default=None, help="run manifest path")

    p = sub.add_parser("coverage", parents=[common], help="SNR at a coverage level or coverage at an SNR")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--percent", type=float, help="covered users in percent")
    g.add_argument("--fraction", type=float, help="covered users as a fraction")
    g.add_argument("--snr", type=float, help="SNR threshold in dB")
    p.add_argument("--ps", type=float, default=66.0, help="transmit power, dBm")
    p.add_argument("--pn", type=float, default=-95.0, help="noise power, dBm")
    p.add_argument("--radius", type=float, default=4.0, help="cell radius, km")
    p.add_argument("--sigma", type=float, default=8.0, help="shadowing std, dB")
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("capacity", parents=[common], help="BICM-SIC rates of a constellation file")
    p.add_argument("--constellation", required=True)
    _add_channel(p, snr_l_required=False)
    p.add_argument("--power", type=float, default=1.0, help="reference power for the SNR")
    p.add_argument("--nodes", type=int, default=48)
    p.add_argument("--mc-check", action="store_true", dest="mc_check")
    p.add_argument("--mc-samples", type=int, default=200_000, dest="mc_samples")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("optimize", parents=[common], help="design a free HM constellation")
    p.add_argument("--mh", type=int, required=True)
    p.add_argument("--ml", type=int, required=True)
    _add_channel(p)
    p.add_argument("--rstar", type=float, required=True)
    p.add_argument("--power", type=float, default=1.0)
    p.add_argument("--papr", type=float, default=None)
    p.add_argument("--symmetry", choices=["none", "central"], default="none")
    _add_common_solver(p)
    p.add_argument("--out", required=True, help="constellation JSON output")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("hqam", parents=[common], help="optimise the H-QAM scale pair")
    p.add_argument("--ml", type=int, required=True)
    _add_channel(p)
    p.add_argument("--rstar", type=float, required=True)
    p.add_argument("--power", type=float, default=1.0)
    p.add_argument("--papr", type=float, default=None)
    _add_common_solver(p)
    p.add_argument("--out", default=None, help="optional constellation JSON output")
    p.set_defaults(func=cmd_hqam)

    p = sub.add_parser("region", parents=[common], help="rate-region sweeps")
    p.add_argument("--mh", type=int, required=True)
    p.add_argument("--ml", type=int, required=True)
    _add_channel(p)
    p.add_argument("--power", type=float, default=1.0)
    p.add_argument("--papr", type=float, default=None)
    p.add_argument("--points", type=int, required=True)
    p.add_argument("--schemes", default="hm,hqam,td,hull")
    p.add_argument("--margin", type=float, default=0.01, help="dominance margin for witnesses")
    p.add_argument("--td-grid", type=int, default=201, dest="td_grid")
    p.add_argument("--workers", type=int, default=1)
    _add_common_solver(p)
    p.add_argument("--out", required=True, help="CSV path; one file per scheme is derived from it")
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("replay", help="re-run a manifest and compare outputs")
    p.add_argument("manifest_file")
    p.add_argument("--outdir", default=None, help="write replayed outputs here instead")
    p.set_defaults(func=None)
    return parser


_COMMANDS: dict[str, Callable] = {
    "coverage": cmd_coverage,
    "capacity": cmd_capacity,
    "optimize": cmd_optimize,
    "hqam": cmd_hqam,
    "region": cmd_region,
}


def _execute(command: str, args) -> tuple[int, str, dict[str, str]]:
    """Run a command; returns (exit code, stdout text, {path: text})."""
    try:
        doc, outputs = _COMMANDS[command](args)
        return EXIT_OK, _dump(doc), outputs
    except UsageError as exc:
        return EXIT_USAGE, _dump({"error": "usage", "message": str(exc)}), {}
    except (InputError, NoLpBits) as exc:
        return EXIT_INPUT, _dump({"error": "input", "message": str(exc)}), {}
    except CommandFailed as exc:
        payload = dict(exc.payload)
        outputs = payload.pop("_outputs", {})
        return exc.code, _dump(payload), outputs
    except (Infeasible, NoFeasibleStart) as exc:
        return EXIT_INFEASIBLE, _dump(_infeasible(exc).payload), {}
    except (HMDesignError, ArithmeticError, AssertionError) as exc:
        return EXIT_NUMERIC, _dump({"error": "numerical", "message": f"{type(exc).__name__}: {exc}"}), {}
    except ValueError as exc:
        return EXIT_INPUT, _dump({"error": "input", "message": str(exc)}), {}


def _params(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _NON_PARAMS}


def _default_manifest(command: str, args) -> str:
    out = getattr(args, "out", None)
    return f"{out}.manifest.json" if out else f"{command}.manifest.json"


def _replay(args) -> int:
    man = read_manifest(args.manifest_file)
    if man.command not in _COMMANDS:
        print(_dump({"error": "usage", "message": f"unknown command {man.command!r}"}), end="")
        return EXIT_USAGE
    ns = argparse.Namespace(**man.params)
    relocate = {}
    if args.outdir and getattr(ns, "out", None):
        new_out = str(Path(args.outdir) / Path(ns.out).name)
        relocate = {"from": str(Path(ns.out).parent), "to": args.outdir}
        ns.out = new_out
    code, text, outputs = _execute(man.command, ns)
    for path, body in outputs.items():
        atomic_write(path, body)
    mismatches = []
    if code != man.exit_code:
        mismatches.append(f"exit code {code} != {man.exit_code}")
    # relocated paths appear inside the stdout document, so only files are compared then
    if not relocate and sha256_text(text) != man.stdout_sha256:
        mismatches.append("stdout differs")
    expected = {Path(p).name if relocate else p: h for p, h in man.outputs.items()}
    got = {Path(p).name if relocate else p: sha256_text(b) for p, b in outputs.items()}
    for key in sorted(set(expected) | set(got)):
        if expected.get(key) != got.get(key):
            mismatches.append(f"output {key} differs")
    print(_dump({"replayed": man.command, "identical": not mismatches, "mismatches": mismatches}), end="")
    return EXIT_OK if not mismatches else EXIT_NUMERIC


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "replay":
        return _replay(args)

    t0 = time.perf_counter()
    code, text, outputs = _execute(args.command, args)
    for path, body in outputs.items():
        atomic_write(path, body)
    if code == EXIT_USAGE:
        # mirror argparse: message on stderr, nothing else written
        print(f"hmdesign {args.command}: error: {json.loads(text)['message']}", file=sys.stderr)
        return code
    sys.stdout.write(text)
    manifest = RunManifest(
        command=args.command,
        params=_params(args),
        seed=getattr(args, "seed", None),
        duration_s=time.perf_counter() - t0,
        outputs={p: sha256_text(b) for p, b in outputs.items()},
        stdout_sha256=sha256_text(text),
        exit_code=code,
    )
    manifest.write(args.manifest or _default_manifest(args.command, args))
    return code


if __name__ == "__main__":
    sys.exit(main())
