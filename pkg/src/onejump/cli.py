"""Command-line front end.

Every command takes an optional JSON config file whose keys mirror the long
flags (``x_max``, ``master_seed``, ...); flags given on the command line win.
Artifacts go to ``--out``, else ``$ONEJUMP_OUT/<command>``, else
``./onejump-out/<command>``, together with a ``manifest.json``.

Exit status: 0 success, 1 error, 2 inconclusive verdicts, 3 failed suite
criteria.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import time
from pathlib import Path
from typing import Any

import numpy as np
import scipy

from . import __version__
from .classify import ClassifyConfig, classify
from .compound import Counter, TruncationError, compound_tail
from .distributions import from_descriptor
from .gridnum import GridSpec, convolve_tail, discretize, estimate_cF, nfold_tail
from .levy import LevySpec, levy_equiv_check
from .ruin import RiskModel, RuinCertainError, pve_check, simulate_ladder, simulate_ruin, supremum_tail_ladder
from .suite import SuiteOptions, exit_code, run_suite

OUT_ENV = "ONEJUMP_OUT"
EXIT_OK, EXIT_ERROR, EXIT_INCONCLUSIVE, EXIT_FAILED = 0, 1, 2, 3
COMMANDS = ("classify", "cf", "convolve", "compound", "ruin", "levy", "paper-suite")


class ConfigError(ValueError):
    """Schema violation in the merged configuration."""


def _descriptor(value: Any) -> Any:
    """JSON text, a path to a JSON file, or an already parsed object."""
    if value is None or isinstance(value, (dict, list)):
        return value
    text = str(value).strip()
    if text.startswith("{") or text.startswith("["):
        return json.loads(text)
    path = Path(text)
    if not path.exists():
        raise ConfigError(f"{text!r} is neither JSON nor an existing file")
    return json.loads(path.read_text())


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="onejump", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=f"onejump {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seeded=False):
        sp.add_argument("--config", help="JSON config file; flags override its keys")
        sp.add_argument("--out", dest="output_dir", help=f"artifact directory (default ${OUT_ENV}/<command>)")
        if seeded:
            sp.add_argument("--seed", dest="master_seed", type=int, help="master seed (default 0)")
        return sp

    sp = common(sub.add_parser("classify", help="verdicts for the eight tail classes"))
    sp.add_argument("--dist", help="distribution descriptor (JSON or file)")
    sp.add_argument("--x-max", dest="x_max", type=float)
    sp.add_argument("--ks", type=lambda s: [float(v) for v in s.split(",")], help="comma-separated K probes")

    sp = common(sub.add_parser("cf", help="estimate the O-subexponential constant c_F"))
    sp.add_argument("--dist")
    sp.add_argument("--x-max", dest="x_max", type=float)

    sp = common(sub.add_parser("convolve", help="n-fold convolution tail on the grid"))
    sp.add_argument("--dist")
    sp.add_argument("--other", help="second law; convolve dist with it instead of with itself")
    sp.add_argument("--n", type=int)
    sp.add_argument("--x-max", dest="x_max", type=float)

    sp = common(sub.add_parser("compound", help="tail of a random sum"))
    sp.add_argument("--dist")
    sp.add_argument("--counter", help='counter descriptor, e.g. {"kind": "geometric", "p": 0.5}')
    sp.add_argument("--x-max", dest="x_max", type=float)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--cap", type=int)

    sp = common(sub.add_parser("ruin", help="ruin probabilities of a risk model"), seeded=True)
    sp.add_argument("--model", help="model descriptor {claim, interarrival, premium_rate}")
    sp.add_argument("--u", type=lambda s: [float(v) for v in s.split(",")], help="comma-separated initial capitals")
    sp.add_argument("--paths", dest="n_paths", type=int)
    sp.add_argument("--barrier", type=float)
    sp.add_argument("--x-max", dest="x_max", type=float)
    sp.add_argument("--pve", action="store_true", default=None, help="also compare F_M, G and F_I in tail")

    sp = common(sub.add_parser("levy", help="tail equivalence of an infinitely divisible law"))
    sp.add_argument("--spec", dest="levy", help="descriptor {nu1, lambda1, small_jump_mean}")
    sp.add_argument("--x-max", dest="x_max", type=float)

    sp = common(sub.add_parser("paper-suite", help="run the numbered reproduction criteria"), seeded=True)
    sp.add_argument("--quick", action="store_true", default=None, help="fewer simulated paths")
    sp.add_argument("--x-max-scale", dest="x_max_scale", type=float)
    sp.add_argument("--only", type=lambda s: [int(v) for v in s.split(",")], help="criterion numbers to run")
    return p


DEFAULTS: dict[str, dict[str, Any]] = {
    "classify": {"x_max": 1e4},
    "cf": {"x_max": 1e4},
    "convolve": {"n": 2, "x_max": 1e4},
    "compound": {"x_max": 1e4, "eps": 0.1, "cap": 512},
    "ruin": {"u": [0.0], "n_paths": 100_000, "x_max": 1e3, "master_seed": 0, "pve": False},
    "levy": {"x_max": 1e4},
    "paper-suite": {"master_seed": 20240601, "quick": False, "x_max_scale": 1.0},
}
REQUIRED = {
    "classify": ("dist",),
    "cf": ("dist",),
    "convolve": ("dist",),
    "compound": ("dist", "counter"),
    "ruin": ("model",),
    "levy": ("levy",),
    "paper-suite": (),
}


def merge_config(args: argparse.Namespace) -> dict[str, Any]:
    cmd = args.command
    cfg: dict[str, Any] = dict(DEFAULTS[cmd])
    if getattr(args, "config", None):
        data = json.loads(Path(args.config).read_text())
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        if data.get("command", cmd) != cmd:
            raise ConfigError(f"config is for {data['command']!r}, not {cmd!r}")
        cfg.update({k: v for k, v in data.items() if k != "command"})
    for k, v in vars(args).items():
        if k in ("command", "config") or v is None:
            continue
        cfg[k] = v
    missing = [k for k in REQUIRED[cmd] if cfg.get(k) is None]
    if missing:
        raise ConfigError(f"missing required field(s): {', '.join(missing)}")
    for key in ("dist", "other", "counter", "model", "levy"):
        if key in cfg:
            cfg[key] = _descriptor(cfg[key])
    cfg["command"] = cmd
    return cfg


def _out_dir(cfg: dict[str, Any]) -> Path:
    if cfg.get("output_dir"):
        return Path(cfg["output_dir"])
    base = os.environ.get(OUT_ENV)
    return Path(base if base else "onejump-out") / cfg["command"]


def _write_json(path: Path, obj: Any) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_plain) + "\n")


def _plain(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.bool_):
        return bool(o)
    return str(o)


# ---------------------------------------------------------------------------
# commands; each returns (exit status, summary printed to stdout)
# ---------------------------------------------------------------------------


def cmd_classify(cfg, out):
    dist = from_descriptor(cfg["dist"])
    kw = {"x_max": float(cfg["x_max"]), "master_seed": cfg.get("master_seed")}
    if cfg.get("ks"):
        kw["Ks"] = tuple(float(k) for k in cfg["ks"])
    rep = classify(dist, ClassifyConfig(**kw))
    rep.write(out)
    summary = rep.table() | {"L0": rep["L"].long_tailed(rep.config.gamma_zero_tol)}
    if rep.conflicts:
        summary["conflicts"] = rep.conflicts
    return (EXIT_INCONCLUSIVE if rep.inconclusive else EXIT_OK), summary


def cmd_cf(cfg, out):
    est = estimate_cF(from_descriptor(cfg["dist"]), GridSpec(float(cfg["x_max"])))
    est.curve.to_csv(out / "os_ratio.csv")
    s = {"c_F": est.c_F, "diverging": est.diverging, "method": est.method}
    _write_json(out / "cf.json", s)
    return EXIT_OK, s


def cmd_convolve(cfg, out):
    spec = GridSpec(float(cfg["x_max"]))
    a = discretize(from_descriptor(cfg["dist"]), spec, "a")
    if cfg.get("other") is not None:
        g = convolve_tail(a, discretize(from_descriptor(cfg["other"]), spec, "b"))
    else:
        g = nfold_tail(a, int(cfg["n"]))
    g.to_csv(out / "tail.csv")
    probe = [x for x in (1.0, 10.0, 100.0, 1000.0) if x <= spec.x_max]
    s = {"tail": dict(zip(map(str, probe), g.tail_at(np.array(probe)).tolist()))}
    _write_json(out / "convolve.json", s)
    return EXIT_OK, s


def cmd_compound(cfg, out):
    spec = GridSpec(float(cfg["x_max"]))
    claim = discretize(from_descriptor(cfg["dist"]), spec, "claim")
    counter = Counter.from_descriptor(cfg["counter"])
    cf = cfg.get("cf")
    if cf is None:
        est = estimate_cF(claim)
        cf = est.c_F if est.finite else None
    try:
        res = compound_tail(claim, counter, cf, float(cfg["eps"]), cap=int(cfg["cap"]))
    except TruncationError as exc:
        exc.partial.to_csv(out / "tail_partial.csv")
        raise
    res.grid.to_csv(out / "tail.csv")
    s = res.to_dict() | {"c_F_used": cf}
    _write_json(out / "compound.json", s)
    return EXIT_OK, s


def cmd_ruin(cfg, out):
    model = RiskModel.from_descriptor(cfg["model"])
    u = [float(v) for v in np.atleast_1d(cfg["u"])]
    seed = int(cfg["master_seed"])
    ss = np.random.SeedSequence(seed).spawn(2)
    spec = GridSpec(float(cfg["x_max"])).with_knots(*[v for v in u if 0 < v < float(cfg["x_max"])])
    n = int(cfg["n_paths"])
    barrier = cfg.get("barrier")
    est = simulate_ladder(model, ss[0], n, barrier, spec)
    sup = supremum_tail_ladder(est, spec)
    direct = simulate_ruin(model, u, ss[1], n, barrier)
    sup.grid.to_csv(out / "psi_ladder.csv")
    est.ladder_tail.to_csv(out / "ladder_tail.csv")
    s = {
        "u": u,
        "psi_ladder": sup.at(np.array(u)).tolist(),
        "se_ladder": sup.se_at(np.array(u)).tolist(),
        "psi_direct": direct.psi.tolist(),
        "se_direct": direct.se.tolist(),
        "ladder": est.to_dict(),
        "direct": direct.to_dict(),
    }
    status = EXIT_OK
    if cfg.get("pve"):
        rep = pve_check(model, spec, ladder=est)
        rep.write(out / "pve")
        s["pve"] = {"window": list(rep.ratio_window), "reference": rep.reference, "weak_equivalence": rep.equivalences}
        if any(v == "inconclusive" for row in rep.verdicts.values() for v in row.values()):
            status = EXIT_INCONCLUSIVE
    _write_json(out / "ruin.json", s)
    return status, {k: s[k] for k in ("u", "psi_ladder", "se_ladder", "psi_direct", "se_direct")} | (
        {"pve": s["pve"]} if "pve" in s else {}
    )


def cmd_levy(cfg, out):
    rep = levy_equiv_check(LevySpec.from_descriptor(cfg["levy"]), GridSpec(float(cfg["x_max"])))
    rep.write(out)
    s = rep.to_dict()
    incon = any(v == "inconclusive" for row in rep.verdicts.values() for v in row.values())
    return (EXIT_INCONCLUSIVE if incon else EXIT_OK), s


def cmd_suite(cfg, out):
    opts = SuiteOptions(int(cfg["master_seed"]), float(cfg["x_max_scale"]), bool(cfg["quick"]))
    results = run_suite(opts, out, only=cfg.get("only"), echo=lambda line: print(line, flush=True))
    with open(out / "summary.csv", "w") as fh:
        fh.write("criterion,status,name,target\n")
        for r in results:
            fh.write(f"AC{r.id},{r.status},{r.name},\"{r.target}\"\n")
    return exit_code(results), {f"AC{r.id}": r.status for r in results}


HANDLERS = {
    "classify": cmd_classify,
    "cf": cmd_cf,
    "convolve": cmd_convolve,
    "compound": cmd_compound,
    "ruin": cmd_ruin,
    "levy": cmd_levy,
    "paper-suite": cmd_suite,
}


def _versions() -> dict[str, str]:
    return {"onejump": __version__, "python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    t0 = time.perf_counter()
    try:
        cfg = merge_config(args)
        out = _out_dir(cfg)
        out.mkdir(parents=True, exist_ok=True)
        status, summary = HANDLERS[cfg["command"]](cfg, out)
    except (ConfigError, ValueError, KeyError, TypeError, RuinCertainError, TruncationError, OSError) as exc:
        diag = {"error": type(exc).__name__, "message": str(exc), "command": args.command}
        print(json.dumps(diag), file=sys.stderr)
        return EXIT_ERROR
    wall = time.perf_counter() - t0
    _write_json(out / "manifest.json", {"config": cfg, "master_seed": cfg.get("master_seed"), "versions": _versions(), "wall_time_s": wall, "exit_status": status})
    print(json.dumps(summary, indent=2, default=_plain))
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
