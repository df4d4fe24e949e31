"""Command-line entry point: one JSON config per run, machine-readable artifacts.

Commands: symmetrize, polarize, minimize, verify, audit, lint-model, refine.
Exit codes: 0 success / verdict true, 1 verdict false, 2 usage/IO/parse errors,
3 invariant violations in the data (negative values, zero mass, ...).
All randomness flows from seeds in the config, so reruns with an identical
config produce byte-identical reports.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import reportio
from .energy import EnergyError
from .grid import (GridDomain, GridError, GridFunction, load_grid_function,
                   save_grid_function)
from .harness import (HarnessError, RefinementProtocol, polarization_audit,
                      refinement_study)
from .model import ModelError, VariationalModel, feasible_start, preset, validate_growth
from .optimize import MinimizeOptions, OptimizeError, minimize
from .rearrange import (GridExactPolarizer, Polarizer, RearrangeError,
                        distribution_function, polarize, polarize_general,
                        sample_polarizers, schwarz_symmetrize)

EXIT_OK = 0
EXIT_VERDICT_FALSE = 1
EXIT_USAGE = 2
EXIT_INVARIANT = 3


class ConfigError(ValueError):
    pass


_TOP_KEYS = {"command", "preset", "domain", "start", "optimize", "polarizers",
             "polarizer", "input", "output_dir", "emit", "thresholds", "audit",
             "refine"}
_DOMAIN_KEYS = {"N", "shape", "R", "L", "h"}
_START_KEYS = {"s0", "center"}
_OPT_KEYS = {"max_iters", "grad_tol", "energy_tol", "armijo_c",
             "backtrack_factor", "symmetrize_every", "seed"}
_POLSEQ_KEYS = {"seed", "count"}
_POL_KEYS = {"axis", "diag", "sign", "offset_cells", "normal", "offset", "mode"}
_EMIT_KEYS = {"json", "csv", "pgm"}
_THRESH_KEYS = {"distance", "cstar_fraction"}
_AUDIT_KEYS = {"steps", "lambda_tests"}
_REFINE_KEYS = {"h_list"}


def _check_keys(d: dict, allowed: set, where: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


class RunConfig:
    """Validated view of the single JSON config document."""

    def __init__(self, doc: dict, command: str):
        if not isinstance(doc, dict):
            raise ConfigError("config root must be a JSON object")
        _check_keys(doc, _TOP_KEYS, "config root")
        for key, allowed in (("domain", _DOMAIN_KEYS), ("start", _START_KEYS),
                             ("optimize", _OPT_KEYS), ("polarizers", _POLSEQ_KEYS),
                             ("polarizer", _POL_KEYS), ("emit", _EMIT_KEYS),
                             ("thresholds", _THRESH_KEYS), ("audit", _AUDIT_KEYS),
                             ("refine", _REFINE_KEYS)):
            if key in doc:
                if not isinstance(doc[key], dict):
                    raise ConfigError(f"config section {key!r} must be an object")
                _check_keys(doc[key], allowed, f"config section {key!r}")
        if "command" in doc and doc["command"] != command:
            raise ConfigError(
                f"config names command {doc['command']!r} but {command!r} was invoked")
        self.doc = doc
        self.command = command

    def model(self) -> VariationalModel:
        name = self.doc.get("preset")
        if not name:
            raise ConfigError("config requires a preset name")
        try:
            return preset(name)
        except ModelError as exc:
            raise ConfigError(str(exc)) from exc

    def domain(self, model: VariationalModel) -> GridDomain:
        sec = self.doc.get("domain", {})
        if not sec:
            return model.default_domain()
        dim = int(sec.get("N", model.dim))
        shape = sec.get("shape", model.domain_defaults.get("shape", "ball"))
        h = float(sec.get("h", model.domain_defaults.get("h")))
        if shape == "ball":
            R = float(sec.get("R", model.domain_defaults.get("R")))
            L = float(sec.get("L", R + h))
            return GridDomain(dim=dim, h=h, half_extent=L, shape="ball", radius=R)
        L = float(sec.get("L", model.domain_defaults.get("L", 1.0)))
        return GridDomain(dim=dim, h=h, half_extent=L, shape="box")

    def optimize_options(self) -> MinimizeOptions:
        sec = dict(self.doc.get("optimize", {}))
        try:
            return MinimizeOptions(**sec)
        except (OptimizeError, TypeError) as exc:
            raise ConfigError(f"bad optimize options: {exc}") from exc

    def start(self, model: VariationalModel, domain: GridDomain) -> GridFunction:
        if "input" in self.doc:
            return load_grid_function(self.doc["input"], nonneg=True)
        sec = self.doc.get("start", {})
        s0 = float(sec.get("s0", 1.0))
        center = sec.get("center")
        return feasible_start(model, s0, domain, center=center)

    def out_path(self, name: str) -> str:
        out = self.doc.get("output_dir", ".")
        os.makedirs(out, exist_ok=True)
        return os.path.join(out, name)

    def emit(self, kind: str, default: bool = True) -> bool:
        return bool(self.doc.get("emit", {}).get(kind, default))


def _load_input(cfg: RunConfig) -> GridFunction:
    path = cfg.doc.get("input")
    if not path:
        raise ConfigError("this command requires an 'input' grid file")
    return load_grid_function(path)


def cmd_symmetrize(cfg: RunConfig) -> int:
    u = _load_input(cfg)
    if np.any(u.values < 0):
        raise RearrangeError("input contains negative values")
    u_star = schwarz_symmetrize(u)
    save_grid_function(u_star, cfg.out_path("u_star.symf"))
    levels = np.quantile(u.values[u.domain.mask], np.linspace(0.0, 0.95, 20))
    report = {"levels": [float(t) for t in levels],
              "measure_before": [distribution_function(u, float(t)) for t in levels],
              "measure_after": [distribution_function(u_star, float(t)) for t in levels]}
    report["equimeasurable"] = bool(
        all(a == b for a, b in zip(report["measure_before"], report["measure_after"])))
    if cfg.emit("json"):
        reportio.write_json(report, cfg.out_path("symmetrize_report.json"))
    if cfg.emit("pgm", default=False):
        reportio.write_pgm(u_star.values, cfg.out_path("u_star.pgm"))
    return EXIT_OK


def _polarizer_from_config(cfg: RunConfig, domain: GridDomain):
    sec = cfg.doc.get("polarizer")
    if not sec:
        raise ConfigError("cmd polarize requires a 'polarizer' section")
    mode = sec.get("mode", "exact")
    if "normal" in sec or "offset" in sec:
        pol = Polarizer(tuple(float(c) for c in sec["normal"]), float(sec["offset"]))
        if mode == "exact":
            raise ConfigError(
                f"polarizer with normal {sec['normal']} and offset {sec['offset']} "
                f"is not grid-exact but mode 'exact' was requested")
        return pol, False
    kind = "axis" if "axis" in sec else "diag"
    code = int(sec.get("axis", sec.get("diag", 0)))
    gep = GridExactPolarizer(domain, kind, code, int(sec.get("sign", 1)),
                             int(sec["offset_cells"]))
    return gep, True


def cmd_polarize(cfg: RunConfig) -> int:
    u = _load_input(cfg)
    if np.any(u.values < 0):
        raise RearrangeError("input contains negative values")
    pol, exact = _polarizer_from_config(cfg, u.domain)
    out = polarize(u, pol) if exact else polarize_general(u, pol)
    save_grid_function(out, cfg.out_path("u_polarized.symf"))
    before = np.sort(u.values[u.domain.mask])
    after = np.sort(out.values[u.domain.mask])
    report = {"exact": exact,
              "multiset_preserved": bool(np.array_equal(before, after)),
              "sup_change": float(np.abs(out.values - u.values).max())}
    if cfg.emit("json"):
        reportio.write_json(report, cfg.out_path("polarize_report.json"))
    return EXIT_OK


def cmd_minimize(cfg: RunConfig) -> int:
    model = cfg.model()
    domain = cfg.domain(model)
    u0 = cfg.start(model, domain)
    result = minimize(model, u0, cfg.optimize_options())
    save_grid_function(result.u_final, cfg.out_path("u_final.symf"))
    doc = {"energy": result.breakdown.to_dict(), "iterations": result.iterations,
           "converged": result.converged, "lambda": result.lam,
           "message": result.message,
           "line_search_failures": result.line_search_failures}
    if cfg.emit("json"):
        reportio.write_json(doc, cfg.out_path("minimize_report.json"))
    if cfg.emit("csv"):
        reportio.write_csv(result.history, cfg.out_path("minimize_history.csv"),
                           columns=["iter", "E", "J", "Fterm", "W",
                                    "proj_grad_norm", "step"])
    if cfg.emit("pgm", default=False):
        reportio.write_pgm(result.u_final.values, cfg.out_path("u_final.pgm"))
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    from .harness import align, symmetry_report

    model = cfg.model()
    domain = cfg.domain(model)
    u0 = cfg.start(model, domain)
    thr = cfg.doc.get("thresholds", {})
    result = minimize(model, u0, cfg.optimize_options())
    report = symmetry_report(result.u_final, model, result=result,
                             distance_threshold=float(thr.get("distance", 0.05)),
                             cstar_fraction=float(thr.get("cstar_fraction", 0.02)))
    if cfg.emit("json"):
        reportio.write_json(report.to_dict(), cfg.out_path("symmetry_report.json"))
    if cfg.emit("pgm", default=False):
        u_star = schwarz_symmetrize(result.u_final)
        aligned, _ = align(result.u_final, u_star)
        reportio.write_pgm(result.u_final.values, cfg.out_path("u_final.pgm"))
        reportio.write_pgm(u_star.values, cfg.out_path("u_star.pgm"))
        reportio.write_pgm(np.abs(result.u_final.values - aligned.values),
                           cfg.out_path("u_diff.pgm"))
    return EXIT_OK if report.verdict else EXIT_VERDICT_FALSE


def cmd_audit(cfg: RunConfig) -> int:
    model = cfg.model()
    domain = cfg.domain(model)
    if "input" in cfg.doc:
        u = load_grid_function(cfg.doc["input"], nonneg=True)
    else:
        u0 = cfg.start(model, domain)
        u = minimize(model, u0, cfg.optimize_options()).u_final
        domain = u.domain
    sec = cfg.doc.get("audit", {})
    steps = int(sec.get("steps", 100))
    pol_cfg = cfg.doc.get("polarizers", {})
    seq = sample_polarizers(u.domain, int(pol_cfg.get("seed", 1)),
                            int(pol_cfg.get("count", max(steps, 1))))
    audit = polarization_audit(u, model, seq, steps,
                               lambda_tests=int(sec.get("lambda_tests", 5)))
    if cfg.emit("json"):
        reportio.write_json(audit.to_dict(), cfg.out_path("audit_report.json"))
    if cfg.emit("csv"):
        reportio.write_csv(audit.rows, cfg.out_path("audit_table.csv"),
                           columns=["step", "dist", "W", "grad_p", "J",
                                    "Fterm", "E", "lambda"])
    return EXIT_OK if audit.clean else EXIT_VERDICT_FALSE


def cmd_lint_model(cfg: RunConfig) -> int:
    model = cfg.model()
    report = validate_growth(model)
    if cfg.emit("json"):
        reportio.write_json(report.to_dict(), cfg.out_path("lint_report.json"))
    return EXIT_OK if report.passed else EXIT_VERDICT_FALSE


def cmd_refine(cfg: RunConfig) -> int:
    model = cfg.model()
    sec = cfg.doc.get("refine", {})
    h_list = [float(h) for h in sec.get("h_list", [])]
    if not h_list:
        raise ConfigError("cmd refine requires refine.h_list")
    opt_sec = dict(cfg.doc.get("optimize", {}))
    protocol = RefinementProtocol(opts=MinimizeOptions(**opt_sec)) \
        if opt_sec else RefinementProtocol()
    table = refinement_study(model, h_list, protocol)
    if cfg.emit("json"):
        reportio.write_json({"rows": table}, cfg.out_path("refine_report.json"))
    if cfg.emit("csv"):
        reportio.write_csv(table, cfg.out_path("refine_table.csv"),
                           columns=["h", "ps_gap", "polar_gap",
                                    "rel_lp_distance", "verdict"])
    return EXIT_OK


_COMMANDS = {
    "symmetrize": cmd_symmetrize,
    "polarize": cmd_polarize,
    "minimize": cmd_minimize,
    "verify": cmd_verify,
    "audit": cmd_audit,
    "lint-model": cmd_lint_model,
    "refine": cmd_refine,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="symmin",
        description="constrained quasi-linear minimization and symmetry audits")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("config", help="path to the JSON run configuration")
    try:
        args = parser.parse_args(argv)
    except SystemExit:
        return EXIT_USAGE
    try:
        with open(args.config) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"symmin: cannot read config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = RunConfig(doc, args.command)
        return _COMMANDS[args.command](cfg)
    except (ConfigError, ModelError) as exc:
        print(f"symmin: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GridError as exc:
        print(f"symmin: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RearrangeError, OptimizeError, EnergyError, HarnessError) as exc:
        print(f"symmin: invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except OSError as exc:
        print(f"symmin: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
