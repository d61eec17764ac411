"""Command-line entry point: ``priormean run`` and ``priormean report``.

Layout of an output directory::

    manifest.json
    records/<problem>/<acquisition>/<mean>/<repeat>.jsonl
    records/<problem>/<acquisition>/<mean>/<repeat>.timing.json
    report/...
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from . import analysis
from .benchmarks import get_problem
from .engine import RunConfig, RunRecord, grid_configs, run_bo
from .errors import InvalidArgumentError
from .means import MEAN_KINDS

log = logging.getLogger("priormean")

OUT_ENV = "PRIORMEAN_OUT"
MANIFEST = "manifest.json"
EXIT_USAGE = 2


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class GridSpec:
    problems: tuple
    means: tuple = MEAN_KINDS
    acquisitions: tuple = ("EI", "UCB")
    repeats: int = 51
    base_seed: int = 0
    budget: int = 200
    initial: int | None = None  # None: 2 * d
    gp_restarts: int = 10
    alpha: float = 0.05
    ucb_delta: float = 0.1
    n_raw: int | None = None
    n_local: int = 10
    lhs_candidates: int = 1000
    n_trees: int = 100

    def configs(self) -> list:
        return grid_configs(
            self.problems, self.means, self.acquisitions, self.repeats, self.base_seed,
            M=self.initial, T=self.budget, gp_restarts=self.gp_restarts, ucb_delta=self.ucb_delta,
            n_raw=self.n_raw, n_local=self.n_local, lhs_candidates=self.lhs_candidates, n_trees=self.n_trees,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("problems", "means", "acquisitions"):
            d[k] = list(d[k])
        return d


def load_grid(path) -> GridSpec:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    return parse_grid(raw)


def parse_grid(raw) -> GridSpec:
    if not isinstance(raw, dict):
        raise UsageError("config must be a mapping of keys to values")
    known = set(GridSpec.__dataclass_fields__)
    unknown = set(raw) - known
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    if "problems" not in raw:
        raise UsageError("config needs a 'problems' list")
    for k in ("problems", "means", "acquisitions"):
        if k in raw:
            if isinstance(raw[k], str):
                raw[k] = [raw[k]]
            raw[k] = tuple(raw[k])
    try:
        grid = GridSpec(**raw)
        for p in grid.problems:
            get_problem(p)
        for c in grid.configs():
            c.resolved()
    except (InvalidArgumentError, ValueError, TypeError) as exc:
        raise UsageError(f"invalid config: {exc}") from None
    return grid


def record_path(cfg: RunConfig) -> Path:
    return Path("records") / cfg.problem / cfg.acquisition / cfg.mean_kind / f"{cfg.repeat}.jsonl"


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


@dataclass
class Manifest:
    grid: GridSpec
    runs: list = field(default_factory=list)

    @classmethod
    def fresh(cls, grid: GridSpec) -> "Manifest":
        runs = [{"problem": c.problem, "acquisition": c.acquisition, "mean": c.mean_kind, "repeat": c.repeat,
                 "seed": c.seed, "path": str(record_path(c)), "status": "pending", "error": None}
                for c in grid.configs()]
        return cls(grid, runs)

    def save(self, out: Path):
        _atomic_write(out / MANIFEST, json.dumps({"schema_version": 1, "grid": self.grid.to_dict(),
                                                  "runs": self.runs}, indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, out: Path) -> "Manifest":
        raw = json.loads((out / MANIFEST).read_text())
        return cls(parse_grid(raw["grid"]), raw["runs"])


def _record_ok(out: Path, entry: dict) -> bool:
    path = out / entry["path"]
    if entry["status"] != "complete" or not path.exists():
        return False
    try:
        return RunRecord.from_jsonl(path.read_text()).complete
    except (ValueError, KeyError, TypeError):
        return False


def cmd_run(config_path, out_dir, jobs: int = 1, resume: bool = False) -> int:
    grid = load_grid(config_path)
    out = Path(out_dir)
    if (out / MANIFEST).exists():
        if not resume:
            raise UsageError(f"{out} already holds a manifest; pass --resume to continue it")
        manifest = Manifest.load(out)
        if manifest.grid != grid:
            raise UsageError("config differs from the grid recorded in the manifest")
    else:
        manifest = Manifest.fresh(grid)
        out.mkdir(parents=True, exist_ok=True)
        manifest.save(out)
    configs = grid.configs()
    pending = [i for i, e in enumerate(manifest.runs) if not _record_ok(out, e)]
    log.info("%d of %d runs pending", len(pending), len(configs))

    def finish(i, rec: RunRecord):
        entry = manifest.runs[i]
        _atomic_write(out / entry["path"], rec.to_jsonl())
        timing = Path(entry["path"]).with_suffix(".timing.json")
        _atomic_write(out / timing, json.dumps({"wall_times": rec.wall_times}) + "\n")
        entry["status"] = "complete" if rec.complete else "failed"
        entry["error"] = rec.error
        manifest.save(out)
        log.info("%s/%s/%s repeat %d: %s", entry["problem"], entry["acquisition"], entry["mean"],
                 entry["repeat"], entry["status"])

    if jobs <= 1:
        for i in pending:
            finish(i, run_bo(configs[i]))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {pool.submit(run_bo, configs[i]): i for i in pending}
            for fut in as_completed(futures):
                finish(futures[fut], fut.result())
    failed = [e for e in manifest.runs if e["status"] != "complete"]
    for e in failed:
        print(f"FAILED {e['path']}: {e['error']}", file=sys.stderr)
    return 1 if failed else 0


def load_records(out: Path) -> tuple[list, list]:
    """Complete records and the manifest entries that are missing or failed."""
    manifest = Manifest.load(out)
    records, missing = [], []
    for e in manifest.runs:
        if _record_ok(out, e):
            records.append(RunRecord.from_jsonl((out / e["path"]).read_text()))
        else:
            missing.append(e)
    return records, missing


def _paired_subset(records: list) -> list:
    """Drop repeats not completed by every mean kind of their cell."""
    by_cell = {}
    for r in records:
        c = r.config
        by_cell.setdefault((c.problem, c.acquisition), {}).setdefault(c.mean_kind, set()).add(c.repeat)
    keep = {cell: set.intersection(*kinds.values()) for cell, kinds in by_cell.items()}
    return [r for r in records if r.config.repeat in keep[(r.config.problem, r.config.acquisition)]]


def cmd_report(out_dir, kind: str = "table", alpha: float = 0.05, nrmse_seed: int = 0) -> list:
    out = Path(out_dir)
    if not (out / MANIFEST).exists():
        raise UsageError(f"no manifest in {out}")
    records, missing = load_records(out)
    if missing:
        names = ", ".join(e["path"] for e in missing[:10])
        more = "" if len(missing) <= 10 else f" (+{len(missing) - 10} more)"
        print(f"warning: partial report, {len(missing)} runs missing: {names}{more}", file=sys.stderr)
    records = _paired_subset(records)
    rep = out / "report"
    written = []
    if kind == "table":
        table = analysis.build_table(records, alpha)
        written.append(rep / "table.csv")
        _atomic_write(written[-1], table.to_csv())
        for acq in table.acquisitions():
            written.append(rep / f"table_{acq}.txt")
            _atomic_write(written[-1], table.to_text(acq))
    elif kind == "convergence":
        written.append(rep / "convergence.csv")
        _atomic_write(written[-1], analysis.convergence_csv(records))
    elif kind == "nrmse":
        study = analysis.run_nrmse_study(records, seed=nrmse_seed)
        written.append(rep / "nrmse.csv")
        _atomic_write(written[-1], study.to_csv())
        table = study.table(alpha)
        for acq in table.acquisitions():
            written.append(rep / f"nrmse_table_{acq}.txt")
            _atomic_write(written[-1], table.to_text(acq))
    else:
        raise UsageError(f"unknown report kind {kind!r}")
    return written


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="priormean", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run (or resume) an experiment grid")
    run.add_argument("--config", required=True)
    run.add_argument("--out", default=os.environ.get(OUT_ENV))
    run.add_argument("--jobs", type=int, default=1)
    run.add_argument("--resume", action="store_true")
    rep = sub.add_parser("report", help="tables, convergence traces or NRMSE study from a finished grid")
    rep.add_argument("--out", default=os.environ.get(OUT_ENV))
    rep.add_argument("--kind", choices=("table", "convergence", "nrmse"), default="table")
    rep.add_argument("--alpha", type=float, default=0.05)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    if args.out is None:
        parser.error(f"--out is required when {OUT_ENV} is unset")
    try:
        if args.command == "run":
            return cmd_run(args.config, args.out, args.jobs, args.resume)
        for path in cmd_report(args.out, args.kind, args.alpha):
            print(path)
        return 0
    except UsageError as exc:
        print(f"priormean: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
