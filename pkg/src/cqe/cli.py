"""Command-line driver: ``cqe run``, ``cqe fci`` and ``cqe sweep``.

Settings come from built-in defaults, then an optional ``key=value``
config file, then command-line flags (flags win).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import itertools
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from .ansatz import SparsifierConfig
from .fcidump import FCIDumpError, MolecularIntegrals, read_fcidump
from .oracle import SectorSpec, fci_ground_state
from .optimize import OPTIMIZERS, ConvergenceTrace, CQEProblem, OptimizerConfig, run_cqe
from .pauli import ENCODINGS, hamiltonian_to_pauli

log = logging.getLogger("cqe")

EXIT_OK, EXIT_INPUT, EXIT_MAX_ITER, EXIT_LINE_SEARCH, EXIT_STALLED = 0, 1, 2, 3, 4
EXIT_CODES = {
    "converged": EXIT_OK,
    "max_iter": EXIT_MAX_ITER,
    "line_search_failed": EXIT_LINE_SEARCH,
    "stalled": EXIT_STALLED,
}

TRACE_HEADER = ["iter", "energy", "grad_norm", "alpha", "n_layers", "n_terms", "cnot_circuit", "cnot_cumulative"]
SWEEP_HEADER = ["criterion", "include", "c", "p_depth", "iterations", "total_cnot", "termination"]

DEFAULT_GRID = {
    "criteria": ("abs", "descent"),
    "includes": (False, True),
    "c_values": (0.9, 0.5, 0.25, 0.125),
    "p_depths": (9, 7, 5, 3, 1),
}


class ConfigError(ValueError):
    pass


def parse_bool(text: str | bool) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"expected true or false, got {text!r}")


def _optional_float(text):
    if text is None or str(text).strip().lower() in ("", "none", "default"):
        return None
    return float(text)


# config key -> converter; sparsifier and path keys are handled by RunConfig
_OPT_FIELDS = {
    "threshold": float,
    "max_iter": int,
    "lbfgs_memory": int,
    "c1": float,
    "c2": _optional_float,
    "alpha_first": float,
    "alpha_lo": float,
    "alpha_hi": float,
    "max_ls_evals": int,
    "gd_step": float,
    "quad_alpha_max": float,
    "cg_restart": float,
    "bfgs_scale_initial": parse_bool,
    "alpha_policy": str,
}
_SPARSE_FIELDS = {"criterion": str, "sparsity_c": float, "include": parse_bool, "p_depth": int}
_RUN_FIELDS = {"fcidump": str, "encoding": str, "optimizer": str, "trace": str, "summary": str}
KNOWN_KEYS = set(_OPT_FIELDS) | set(_SPARSE_FIELDS) | set(_RUN_FIELDS)


@dataclass
class RunConfig:
    fcidump: Path | None = None
    encoding: str = "fermionic"
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    trace: Path | None = None
    summary: Path | None = None

    @classmethod
    def from_mapping(cls, values: dict[str, Any]) -> "RunConfig":
        unknown = set(values) - KNOWN_KEYS
        if unknown:
            raise ConfigError(f"unknown setting(s): {', '.join(sorted(unknown))}")
        try:
            opt = {k: conv(values[k]) for k, conv in _OPT_FIELDS.items() if k in values}
            sparse = {}
            if "criterion" in values:
                sparse["criterion"] = str(values["criterion"])
            if "sparsity_c" in values:
                sparse["c"] = float(values["sparsity_c"])
            if "include" in values:
                sparse["include"] = parse_bool(values["include"])
            if "p_depth" in values:
                sparse["p_depth"] = int(values["p_depth"])
            kind = str(values.get("optimizer", "bfgs"))
            optimizer = OptimizerConfig(kind=kind, sparsifier=SparsifierConfig(**sparse), **opt)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        encoding = str(values.get("encoding", "fermionic"))
        if encoding not in ENCODINGS:
            raise ConfigError(f"unknown encoding {encoding!r}; choose from {ENCODINGS}")

        def path(key):
            return Path(values[key]) if values.get(key) else None

        return cls(path("fcidump"), encoding, optimizer, path("trace"), path("summary"))


def read_config_file(path: str | Path) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment; dashes in keys become underscores."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _merge_settings(args: argparse.Namespace, keys) -> dict[str, Any]:
    values: dict[str, Any] = {}
    if getattr(args, "config", None):
        try:
            values.update(read_config_file(args.config))
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    for key in keys:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return values


def _load_integrals(path: Path | None) -> MolecularIntegrals:
    if path is None:
        raise ConfigError("no FCIDUMP given (use --fcidump or fcidump= in the config)")
    try:
        return read_fcidump(path)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except FCIDumpError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _fmt_float(x: float) -> str:
    return f"{x:.10g}"


def trace_csv(trace: ConvergenceTrace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for r in trace.records:
        w.writerow([r.n, f"{r.energy:.10f}", f"{r.grad_norm:.5e}", _fmt_float(r.alpha), r.layer_count,
                    r.term_count, r.circuit_cnots, r.cumulative_cnots])
    return buf.getvalue()


def trace_summary(trace: ConvergenceTrace, cfg: RunConfig) -> dict[str, Any]:
    last = trace.records[-1]
    opt = dataclasses.asdict(cfg.optimizer)
    return {
        "termination": trace.termination,
        "converged": trace.converged,
        "final_energy": last.energy,
        "final_grad_norm": last.grad_norm,
        "iterations": trace.iterations,
        "pool_size": trace.pool_size,
        "residual_evaluations": trace.residual_evaluations,
        "line_search_evaluations": sum(r.ls_evals for r in trace.records),
        "final_layers": last.layer_count,
        "final_terms": last.term_count,
        "final_circuit_cnots": last.circuit_cnots,
        "total_cnot": last.cumulative_cnots,
        "settings": {"fcidump": str(cfg.fcidump), "encoding": cfg.encoding, **opt},
    }


def _write(path: Path | None, text: str):
    if path is None:
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def execute(cfg: RunConfig, ints: MolecularIntegrals | None = None) -> ConvergenceTrace:
    ints = ints if ints is not None else _load_integrals(cfg.fcidump)
    return run_cqe(CQEProblem(ints, cfg.encoding), cfg.optimizer)


def cmd_run(cfg: RunConfig) -> int:
    try:
        ints = _load_integrals(cfg.fcidump)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    trace = execute(cfg, ints)
    _write(cfg.trace, trace_csv(trace))
    _write(cfg.summary, json.dumps(trace_summary(trace, cfg), indent=2) + "\n")
    print(f"{trace.termination}: E = {trace.final_energy:.10f} Eh, |A| = {trace.final_grad_norm:.5e}, "
          f"{trace.iterations} iterations")
    return EXIT_CODES[trace.termination]


def cmd_fci(cfg: RunConfig, nelec: int | None = None, ms2: int | None = None) -> int:
    try:
        ints = _load_integrals(cfg.fcidump)
        sector = SectorSpec(ints.nelec if nelec is None else nelec, ints.ms2 if ms2 is None else ms2)
        energy, _ = fci_ground_state(hamiltonian_to_pauli(ints), sector)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(f"{energy:.10f}")
    return EXIT_OK


def sweep_cells(grid: dict[str, Sequence]) -> list[tuple[str, bool, float, int]]:
    cells = list(itertools.product(grid["criteria"], grid["includes"], grid["c_values"], grid["p_depths"]))
    if not cells:
        raise ConfigError("sweep grid is empty")
    return cells


def cell_name(index: int, criterion: str, include: bool, c: float, p_depth: int) -> str:
    return f"cell{index:03d}_{criterion}_include-{str(include).lower()}_c{c:g}_p{p_depth}.csv"


def cmd_sweep(cfg: RunConfig, grid: dict[str, Sequence], out_dir: Path) -> int:
    try:
        cells = sweep_cells(grid)
        ints = _load_integrals(cfg.fcidump)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    rows = []
    for index, (criterion, include, c, p_depth) in enumerate(cells):
        row = {"criterion": criterion, "include": str(include).lower(), "c": f"{c:g}", "p_depth": p_depth}
        try:
            sparse = SparsifierConfig(criterion=criterion, c=c, include=include, p_depth=p_depth)
            cell = dataclasses.replace(cfg, optimizer=dataclasses.replace(cfg.optimizer, sparsifier=sparse))
            trace = execute(cell, ints)
        except Exception as exc:  # a broken cell must not abort the sweep
            log.warning("sweep cell %d failed: %s", index, exc)
            row.update(iterations="", total_cnot="", termination=f"error: {exc}")
        else:
            _write(out_dir / cell_name(index, criterion, include, c, p_depth), trace_csv(trace))
            row.update(iterations=trace.iterations, total_cnot=trace.records[-1].cumulative_cnots,
                       termination=trace.termination)
        rows.append(row)
        log.info("cell %d/%d %s", index + 1, len(cells), row)
    buf = io.StringIO()
    w = csv.DictWriter(buf, SWEEP_HEADER, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    _write(cfg.summary or out_dir / "sweep.csv", buf.getvalue())
    print(f"{len(rows)} cells, {sum(r['termination'] == 'converged' for r in rows)} converged")
    return EXIT_OK


def _csv_list(conv):
    def parse(text: str):
        try:
            return tuple(conv(tok) for tok in text.split(",") if tok.strip())
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from exc
    return parse


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key=value settings file; flags override it")
    p.add_argument("--fcidump", help="integral file")
    p.add_argument("--encoding", choices=ENCODINGS)
    p.add_argument("-v", "--verbose", action="store_true")


def _add_optimizer(p: argparse.ArgumentParser):
    p.add_argument("--optimizer", choices=OPTIMIZERS)
    p.add_argument("--threshold", type=float, help="stop once |A| drops below this")
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--lbfgs-memory", dest="lbfgs_memory", type=int)
    p.add_argument("--gd-step", dest="gd_step", type=float)
    p.add_argument("--c1", type=float)
    p.add_argument("--c2", type=float)
    p.add_argument("--p-depth", dest="p_depth", type=int)
    p.add_argument("--sparsity-c", dest="sparsity_c", type=float)
    p.add_argument("--criterion", choices=("abs", "descent"))
    p.add_argument("--include", type=parse_bool, metavar="{true,false}")
    p.add_argument("--summary", help="JSON summary (run) or combined CSV (sweep)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cqe", description="Contracted quantum eigensolver simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="optimize one configuration")
    _add_common(run)
    _add_optimizer(run)
    run.add_argument("--trace", help="per-iteration CSV")

    fci = sub.add_parser("fci", help="print the sector ground-state energy")
    _add_common(fci)
    fci.add_argument("--nelec", type=int)
    fci.add_argument("--ms2", type=int)

    sweep = sub.add_parser("sweep", help="grid over sparsification settings")
    _add_common(sweep)
    _add_optimizer(sweep)
    sweep.add_argument("--out-dir", dest="out_dir", default="sweep_out")
    sweep.add_argument("--criteria", type=_csv_list(str), default=DEFAULT_GRID["criteria"])
    sweep.add_argument("--includes", type=_csv_list(parse_bool), default=DEFAULT_GRID["includes"])
    sweep.add_argument("--c-values", dest="c_values", type=_csv_list(float), default=DEFAULT_GRID["c_values"])
    sweep.add_argument("--p-depths", dest="p_depths", type=_csv_list(int), default=DEFAULT_GRID["p_depths"])
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig.from_mapping(_merge_settings(args, KNOWN_KEYS))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.command == "run":
        return cmd_run(cfg)
    if args.command == "fci":
        return cmd_fci(cfg, args.nelec, args.ms2)
    grid = {k: getattr(args, k) for k in DEFAULT_GRID}
    return cmd_sweep(cfg, grid, Path(args.out_dir))


if __name__ == "__main__":
    sys.exit(main())
