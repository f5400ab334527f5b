"""Command-line entry point: ``causalvar <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import report as rep
from .decomp import influence
from .equilibrium import local_distribution, solve_pi, solve_pi_quota
from .errors import CausalVarError, ContractError
from .identification import BootstrapConfig, identify
from .panel import LagSpec, load_panel, standardize
from .simgen import TEMPLATE_IDS, average_row, run_study
from .structure import CausalStructure
from .var import check_stationary, companion, fit_var

COMMANDS = ("decompose", "pi", "identify", "local", "simulate")
QUICK_DATASETS = 20
QUICK_REPLICATES = 100

# defaults applied after the config file, so that both flags and file entries can override them
DEFAULTS = {
    "lags": "1,2",
    "horizon": "limit",
    "format": "json",
    "delimiter": ",",
    "replicates": 200,
    "alpha": 0.05,
    "seed": 0,
    "scheme": "residual",
    "template": "all",
    "datasets": 100,
    "T": 100,
    "workers": 1,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _horizon(text):
    text = str(text).strip()
    if text == "limit":
        return None
    try:
        h = int(text)
    except ValueError:
        raise UsageError(f"horizon must be a positive integer or 'limit', got {text!r}") from None
    if h < 1:
        raise UsageError(f"horizon must be a positive integer or 'limit', got {h}")
    return h


def _positive(name):
    def conv(text):
        try:
            v = int(text)
        except ValueError:
            raise UsageError(f"--{name} must be an integer, got {text!r}") from None
        if v < 1:
            raise UsageError(f"--{name} must be at least 1, got {v}")
        return v
    return conv


def _nonneg_int(text):
    try:
        v = int(text)
    except ValueError:
        raise UsageError(f"seed must be a non-negative integer, got {text!r}") from None
    if v < 0:
        raise UsageError(f"seed must be a non-negative integer, got {v}")
    return v


def _floats(text):
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _flag(text):
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"expected a boolean, got {text!r}")


# converters applied to values from flags, the config file and defaults alike
CONVERTERS = {
    "lags": lambda s: LagSpec.parse(str(s)),
    "horizon": _horizon,
    "replicates": _positive("replicates"),
    "datasets": _positive("datasets"),
    "T": _positive("T"),
    "workers": _positive("workers"),
    "steps": _positive("steps"),
    "block_length": _positive("block-length"),
    "seed": _nonneg_int,
    "alpha": float,
    "quota": _floats,
    "standardize": _flag,
    "omega": _flag,
    "quick": _flag,
    "verify": _flag,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="causalvar", description="Equilibrium causality analysis of vector autoregressions.")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    def common(p):
        p.add_argument("--format", choices=rep.FORMATS, help="report format (default json)")
        p.add_argument("--output", help="write the report here instead of stdout")
        p.add_argument("--config", help="file of key=value lines; command-line flags take precedence")
        p.add_argument("--verify", action="store_const", const=True,
                       help="compute the report twice and fail unless both runs agree byte for byte")

    def data(p, omega=False):
        p.add_argument("input", help="CSV file with one column per series and a header row")
        p.add_argument("--columns", help="comma-separated series to load (default all)")
        p.add_argument("--delimiter", help="field delimiter (default ',')")
        p.add_argument("--time-column", dest="time_column", help="column holding time labels")
        p.add_argument("--standardize", action="store_const", const=True,
                       help="rescale each series to mean 0, variance 1 before fitting")
        p.add_argument("--lags", help="lag set, e.g. '1,2' or '2' for 1..2 (default 1,2)")
        p.add_argument("--horizon", help="forecast horizon or 'limit' (default limit)")
        if omega:
            p.add_argument("--omega", action="store_const", const=True,
                           help="the input is an influence matrix (header of names, one row per variable)")

    def boot(p):
        p.add_argument("--replicates", help="bootstrap replicates (default 200)")
        p.add_argument("--alpha", help="significance level (default 0.05)")
        p.add_argument("--seed", help="master seed (default 0)")
        p.add_argument("--scheme", choices=("residual", "block"), help="bootstrap scheme")
        p.add_argument("--block-length", dest="block_length", help="block length of the block scheme")
        p.add_argument("--steps", help="iteration steps of the endogeneity statistic")

    p = sub.add_parser("decompose", help="influence matrix of a fitted VAR")
    data(p)
    common(p)

    p = sub.add_parser("pi", help="equilibrium causality distribution")
    data(p, omega=True)
    p.add_argument("--quota", help="per-class quotas, comma separated, summing to 1 (needs --structure)")
    p.add_argument("--structure", help="structure JSON (as written by 'identify')")
    common(p)

    p = sub.add_parser("identify", help="bootstrap identification of classes and the transient set")
    data(p)
    boot(p)
    common(p)

    p = sub.add_parser("local", help="local causality distribution of transient variables")
    data(p, omega=True)
    p.add_argument("--structure", help="structure JSON (required)")
    p.add_argument("--target", help="transient variable (default every transient variable)")
    common(p)

    p = sub.add_parser("simulate", help="accuracy study on simulated reference structures")
    p.add_argument("--template", help=f"one of {', '.join(TEMPLATE_IDS)} or 'all' (default all)")
    p.add_argument("--datasets", help="datasets per template (default 100)")
    p.add_argument("--T", dest="T", help="sample length (default 100)")
    p.add_argument("--lags", help="lag set used for estimation (default 1,2)")
    p.add_argument("--horizon", help="forecast horizon or 'limit' (default limit)")
    p.add_argument("--quick", action="store_const", const=True,
                   help=f"{QUICK_DATASETS} datasets and {QUICK_REPLICATES} replicates per template")
    p.add_argument("--workers", help="worker processes (results do not depend on it)")
    boot(p)
    common(p)
    return parser


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (x.strip() for x in line.split("=", 1))
        out[key.replace("-", "_")] = value.strip("\"'")
    return out


def resolve(args: argparse.Namespace) -> dict:
    """Merge flags over the config file over defaults and convert every value."""
    given = {k: v for k, v in vars(args).items() if v is not None}
    merged = dict(DEFAULTS)
    if args.config:
        file_values = read_config_file(args.config)
        unknown = sorted(k for k in file_values if k not in vars(args) or k in ("command", "config"))
        if unknown:
            raise UsageError(f"unknown config key(s): {', '.join(unknown)}")
        merged.update(file_values)
    merged.update(given)
    merged = {k: v for k, v in merged.items() if k in vars(args)}
    for key, conv in CONVERTERS.items():
        if key in merged and merged[key] is not None:
            try:
                merged[key] = conv(merged[key])
            except ContractError as exc:
                raise UsageError(str(exc)) from None
            except ValueError as exc:
                raise UsageError(f"invalid value for {key}: {exc}") from None
    if merged.get("alpha") is not None and not 0 < merged["alpha"] <= 0.5:
        raise UsageError("alpha must lie in (0, 0.5]")
    return merged


def _load(cfg):
    columns = cfg.get("columns")
    schema = [c.strip() for c in columns.split(",")] if columns else None
    panel = load_panel(cfg["input"], schema, delimiter=cfg["delimiter"], time_column=cfg.get("time_column"))
    if cfg.get("standardize"):
        panel = standardize(panel)
    return panel


def _omega(cfg):
    """Influence matrix from the input: either given directly or estimated from the panel."""
    if cfg.get("omega"):
        m = _load(cfg)
        om = m.values.T
        if om.shape[0] != om.shape[1]:
            raise UsageError(f"an influence matrix needs as many rows as columns, got {om.shape}")
        from .decomp import InfluenceMatrix

        return InfluenceMatrix(om, m.names), None
    panel = _load(cfg)
    model = fit_var(panel, cfg["lags"])
    return influence(model, cfg["horizon"]), model


def _load_structure(path) -> CausalStructure:
    if path is None:
        raise UsageError("--structure is required")
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read structure file {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ContractError(f"structure file is not valid JSON: {exc}") from None
    if "result" in doc and isinstance(doc["result"], dict):
        doc = doc["result"]
    if "structure" in doc:
        doc = doc["structure"]
    return CausalStructure.from_dict(doc)


def _echo(cfg, keys) -> dict:
    out = {}
    for k in keys:
        v = cfg.get(k)
        if isinstance(v, LagSpec):
            v = list(v.lags)
        if k == "horizon":
            v = "limit" if v is None else v
        out[k] = v
    return out


def cmd_decompose(cfg) -> rep.Report:
    inf, model = _omega(cfg)
    payload = inf.to_dict()
    payload["spectral_radius"] = check_stationary(companion(model)).radius
    rows = [[name, *row, float(row.sum())] for name, row in zip(inf.names, inf.omega)]
    return rep.Report("decompose", payload, ["variable", *inf.names, "row_sum"], rows,
                      _echo(cfg, ("input", "columns", "lags", "horizon", "standardize")))


def cmd_pi(cfg) -> rep.Report:
    inf, _ = _omega(cfg)
    if cfg.get("quota") is not None:
        structure = _load_structure(cfg.get("structure"))
        dist = solve_pi_quota(inf, structure, cfg["quota"])
    else:
        dist = solve_pi(inf)
    rows = [[n, float(v)] for n, v in zip(dist.names, dist.pi)]
    return rep.Report("pi", dist.to_dict(), ["variable", "pi"], rows,
                      _echo(cfg, ("input", "columns", "lags", "horizon", "omega", "quota", "structure", "standardize")))


def _boot_config(cfg, replicates=None) -> BootstrapConfig:
    return BootstrapConfig(
        replicates=replicates or cfg["replicates"],
        seed=cfg["seed"],
        alpha=cfg["alpha"],
        scheme=cfg["scheme"],
        block_length=cfg.get("block_length"),
        lag_spec=cfg["lags"],
        horizon=cfg["horizon"],
        steps=cfg.get("steps"),
    )


def _structure_rows(s: CausalStructure, depth=0):
    rows = []
    for c in s.classes:
        rows.append([depth, "class", list(c), ""])
    if s.transient:
        rows.append([depth, "transient", list(s.transient), ""])
    for a, b in s.edges:
        rows.append([depth, "edge", list(a), list(b)])
    if s.sub is not None:
        rows.extend(_structure_rows(s.sub, depth + 1))
    return rows


def cmd_identify(cfg) -> rep.Report:
    panel = _load(cfg)
    result = identify(panel, _boot_config(cfg))
    return rep.Report("identify", result.to_dict(), ["depth", "kind", "members", "target"],
                      _structure_rows(result.structure),
                      _echo(cfg, ("input", "columns", "standardize")) | result.config.to_dict())


def cmd_local(cfg) -> rep.Report:
    structure = _load_structure(cfg.get("structure"))
    inf, _ = _omega(cfg)
    targets = [cfg["target"]] if cfg.get("target") else list(structure.transient)
    if not targets:
        raise ContractError("the structure has no transient variables")
    h = cfg["horizon"]
    dists = [local_distribution(inf, structure, t, horizon=h) for t in targets]
    rows = [[d.scope.split(":", 1)[1], n, float(v)] for d in dists for n, v in zip(d.names, d.pi)]
    payload = {"distributions": [d.to_dict() for d in dists], "structure": structure.to_dict()}
    return rep.Report("local", payload, ["target", "variable", "share"], rows,
                      _echo(cfg, ("input", "columns", "lags", "horizon", "omega", "structure", "target", "standardize")))


def cmd_simulate(cfg) -> rep.Report:
    if cfg.get("quick"):
        cfg = dict(cfg, datasets=QUICK_DATASETS, replicates=QUICK_REPLICATES)
    template = cfg["template"]
    if template != "all" and template not in TEMPLATE_IDS:
        raise UsageError(f"unknown template {template!r}; choose from {', '.join(TEMPLATE_IDS)} or all")
    tids = TEMPLATE_IDS if template == "all" else (template,)
    bc = _boot_config(cfg)
    rows = [run_study(t, cfg["datasets"], cfg["T"], bc, master_seed=cfg["seed"], workers=cfg["workers"])
            for t in tids]
    dicts = [r.to_dict() for r in rows]
    if len(rows) > 1:
        dicts.append(average_row(rows))
    header = list(dicts[0])
    payload = {"rows": dicts}
    echo = _echo(cfg, ("template", "datasets", "T", "quick")) | bc.to_dict()
    return rep.Report("simulate", payload, header, [[d[k] for k in header] for d in dicts], echo)


HANDLERS = {
    "decompose": cmd_decompose,
    "pi": cmd_pi,
    "identify": cmd_identify,
    "local": cmd_local,
    "simulate": cmd_simulate,
}


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"warning: {message}", file=sys.stderr)


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args)
        if args.command == "simulate" and args.quick and (args.datasets is not None or args.replicates is not None):
            raise UsageError("--quick fixes --datasets and --replicates; do not combine them")
        if args.command == "pi" and cfg.get("quota") is not None and not cfg.get("structure"):
            raise UsageError("--quota needs --structure")
        handler = HANDLERS[args.command]
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            warnings.showwarning = _show_warning
            text = rep.render(handler(cfg), cfg["format"])
            if cfg.get("verify"):
                again = rep.render(handler(cfg), cfg["format"])
                if again != text:
                    print("error: verification rerun produced a different report", file=sys.stderr)
                    return 3
        if cfg.get("output"):
            rep.write_atomic(cfg["output"], text)
        else:
            sys.stdout.write(text)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"causalvar: error: {exc}", file=sys.stderr)
        return 1
    except CausalVarError as exc:
        print(f"causalvar: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


def main() -> None:
    sys.exit(run())
