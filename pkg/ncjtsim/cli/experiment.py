"""
Experiment orchestration

Runs the engine once per (cell, seed), pools samples per cell, re-runs the
first seed of every cell as a determinism self-check and builds the
comparison and directional-check tables of the `--suite paper` grid.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from multiprocessing import Pool
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from ncjtsim.cli import reports
from ncjtsim.core.config import RunConfig, SCHEMES
from ncjtsim.core.engine import RunResult, run_simulation
from ncjtsim.core.events import TraceBus, attach_csv_sinks
from ncjtsim.core.exceptions import DeterminismError
from ncjtsim.core.shared import percent_change
from ncjtsim.core.stats import Percentiles, ThroughputSample, collect_percentiles, pool

logger = logging.getLogger("ncjtsim.experiment")

SUITE_USERS = (3, 5)
SUITE_COORD = (2, 3, 4)
GROUP_SINGLE = "single"
GROUP_COORD = "max_coord_sweep"


def users_group(users_per_trp: int) -> str:
    return f"users_per_trp={users_per_trp}"


@dataclass(frozen=True)
class Cell:
    """One experiment configuration evaluated over every seed"""
    group: str
    config: RunConfig

    @property
    def label(self) -> str:
        run = self.config.run
        return f"{run.scheme}_u{run.users_per_trp}_c{self.config.effective_max_coord}"


@dataclass
class CellResult:
    cell: Cell
    runs: List[RunResult] = field(default_factory=list)

    @property
    def samples(self) -> List[ThroughputSample]:
        return pool(*(r.samples for r in self.runs))

    @cached_property
    def percentiles(self) -> Percentiles:
        return collect_percentiles(self.samples)


def suite_cells(base: RunConfig) -> List[Cell]:
    """Every scheme at 3 and 5 users/TRP, then NF-NCJT over max_coord 2, 3 and 4"""
    cells = []
    for users in SUITE_USERS:
        for scheme in SCHEMES:
            cells.append(Cell(users_group(users), base.with_overrides(
                run={"scheme": scheme, "users_per_trp": users})))
    for max_coord in SUITE_COORD:
        cells.append(Cell(GROUP_COORD, base.with_overrides(
            run={"scheme": "nfncjt", "max_coord": max_coord})))
    return cells


def _trace_dir(config: RunConfig) -> Path:
    return Path(config.run.out) / "traces"


def _run_one(job: Tuple[RunConfig, int, str, bool]) -> RunResult:
    """Worker entry point; attaches its own CSV trace sinks when requested"""
    config, seed, label, traced = job
    bus, sinks = None, []
    dbg = config.debug
    if traced and (dbg.dump_grids or dbg.dump_links or dbg.dump_sinr):
        bus = TraceBus()
        sinks = attach_csv_sinks(bus, _trace_dir(config), f"{label}_seed{seed}",
                                 grids=dbg.dump_grids, links=dbg.dump_links, sinr=dbg.dump_sinr)
    result = run_simulation(config, seed, bus)
    for sink in sinks:
        sink.flush()
    return result


def run_cells(cells: List[Cell], workers: int = 1, self_check: bool = True) -> List[CellResult]:
    """Run every (cell, seed) pair; results keep the (cell, seed) order of a serial run.

    Identical cells (same label and configuration) are run once and shared.
    """
    unique: Dict[str, Cell] = {}
    for cell in cells:
        unique.setdefault(cell.label, cell)

    jobs = [(cell.config, seed, label, True)
            for label, cell in unique.items() for seed in cell.config.run.seeds]
    if self_check:
        jobs += [(cell.config, cell.config.run.seeds[0], label, False) for label, cell in unique.items()]

    logger.info(f"Dispatching {len(jobs)} runs over {len(unique)} cells with {workers} worker(s)")
    if workers > 1 and len(jobs) > 1:
        with Pool(processes=min(workers, len(jobs))) as worker_pool:
            outcomes = worker_pool.map(_run_one, jobs)
    else:
        outcomes = [_run_one(job) for job in jobs]

    by_label: Dict[str, List[RunResult]] = {label: [] for label in unique}
    checks: Dict[str, RunResult] = {}
    for (config, seed, label, traced), result in zip(jobs, outcomes):
        if traced:
            by_label[label].append(result)
        else:
            checks[label] = result

    for label, repeat in checks.items():
        first = by_label[label][0]
        if repeat.digest != first.digest:
            raise DeterminismError(
                f"cell {label} seed {first.seed} did not reproduce its sample stream",
                expected=first.digest, actual=repeat.digest,
            )
    if self_check:
        logger.info(f"Determinism self-check passed for {len(checks)} cell(s)")

    return [CellResult(cell, by_label[cell.label]) for cell in cells]


def distinct(results: List[CellResult]) -> List[CellResult]:
    """First result of every label; suite cells may repeat a configuration"""
    seen, out = set(), []
    for r in results:
        if r.cell.label not in seen:
            seen.add(r.cell.label)
            out.append(r)
    return out


# Comparison and directional checks

@dataclass(frozen=True)
class CheckResult:
    name: str
    detail: str
    value: Optional[float]
    passed: bool
    target: Optional[Tuple[float, float]] = None

    @property
    def in_band(self) -> Optional[bool]:
        if self.target is None or self.value is None:
            return None
        lo, hi = self.target
        return lo <= self.value <= hi

    def as_row(self) -> dict:
        band = self.in_band
        return {
            "check": self.name, "detail": self.detail,
            "value": self.value, "status": "PASS" if self.passed else "MISS",
            "target_low": self.target[0] if self.target else None,
            "target_high": self.target[1] if self.target else None,
            "in_band": "" if band is None else ("yes" if band else "no"),
        }


def _index(results: List[CellResult]) -> Dict[Tuple[str, str], Percentiles]:
    return {(r.cell.group, r.cell.config.run.scheme if r.cell.group != GROUP_COORD
             else str(r.cell.config.run.max_coord)): r.percentiles for r in results}


def _reference_key(cell: Cell) -> Tuple[str, str]:
    if cell.group == GROUP_COORD:
        return cell.group, str(SUITE_COORD[0])
    return cell.group, "none"


def comparison_rows(results: List[CellResult]) -> List[dict]:
    """Percentiles per cell with % deltas against the group's reference cell"""
    index = _index(results)
    rows = []
    for r in results:
        p = r.percentiles
        ref = index.get(_reference_key(r.cell))
        row = {
            "group": r.cell.group, "label": r.cell.label, "scheme": r.cell.config.run.scheme,
            "users_per_trp": r.cell.config.run.users_per_trp,
            "max_coord": r.cell.config.effective_max_coord,
            "p5": p.p5, "p50": p.p50, "p95": p.p95,
        }
        for q in ("p5", "p50", "p95"):
            row[f"{q}_delta_pct"] = percent_change(getattr(p, q), getattr(ref, q) if ref else None)
        rows.append(row)
    return rows


def _order_check(name: str, detail: str, values: Dict[str, Optional[float]], expect: str,
                 highest: bool) -> CheckResult:
    known = {k: v for k, v in values.items() if v is not None}
    if expect not in known:
        return CheckResult(name, detail, None, False)
    pick = max(known, key=known.get) if highest else min(known, key=known.get)
    return CheckResult(name, detail, known[expect], known[expect] == known[pick])


def directional_checks(results: List[CellResult]) -> List[CheckResult]:
    """Qualitative orderings the comparison suite is expected to show"""
    index = _index(results)
    checks: List[CheckResult] = []

    def q(group, key, attr):
        p = index.get((group, key))
        return getattr(p, attr) if p is not None else None

    g3, g5 = users_group(SUITE_USERS[0]), users_group(SUITE_USERS[1])
    coord = ("dps", "fncjt", "nfncjt")
    checks.append(_order_check("dps_best_cell_edge", "DPS has the highest p5 at 3 users/TRP",
                               {s: q(g3, s, "p5") for s in SCHEMES}, "dps", highest=True))
    checks.append(_order_check("fncjt_worst_cell_edge", "F-NCJT has the lowest p5 at 3 users/TRP",
                               {s: q(g3, s, "p5") for s in SCHEMES}, "fncjt", highest=False))
    checks.append(_order_check("fncjt_worst_median", "F-NCJT has the lowest median at 3 users/TRP",
                               {s: q(g3, s, "p50") for s in SCHEMES}, "fncjt", highest=False))
    checks.append(_order_check("nfncjt_best_median", "NF-NCJT has the highest median among coordination schemes",
                               {s: q(g3, s, "p50") for s in coord}, "nfncjt", highest=True))
    checks.append(_order_check("dps_lowest_cell_centre", "DPS has the lowest p95 at 3 users/TRP",
                               {s: q(g3, s, "p95") for s in SCHEMES}, "dps", highest=False))

    def fncjt_gap(group):
        ref = q(group, "none", "p50")
        others = [q(group, s, "p50") for s in SCHEMES if s != "fncjt"]
        own = q(group, "fncjt", "p50")
        if ref in (None, 0) or own is None or any(o is None for o in others):
            return None
        return (sum(others) / len(others) - own) / ref

    gap3, gap5 = fncjt_gap(g3), fncjt_gap(g5)
    checks.append(CheckResult(
        "fncjt_median_gap_grows", "F-NCJT median gap to the other schemes is larger at 5 than at 3 users/TRP",
        None if gap3 is None or gap5 is None else 100.0 * (gap5 - gap3),
        gap3 is not None and gap5 is not None and gap5 > gap3,
    ))

    def ratio(group, num, den, attr):
        a, b = q(group, num, attr), q(group, den, attr)
        return None if a is None or not b else a / b

    edge3, edge5 = ratio(g3, "dps", "nfncjt", "p5"), ratio(g5, "dps", "nfncjt", "p5")
    checks.append(CheckResult(
        "dps_edge_gain_shrinks", "DPS/NF-NCJT p5 ratio is smaller at 5 than at 3 users/TRP",
        None if edge3 is None or edge5 is None else edge5 - edge3,
        edge3 is not None and edge5 is not None and edge5 < edge3,
    ))

    sensitivity = {s: percent_change(q(g5, s, "p50"), q(g3, s, "p50")) for s in SCHEMES}
    known = {s: abs(v) for s, v in sensitivity.items() if v is not None}
    nf = known.get("nfncjt")
    checks.append(CheckResult(
        "nfncjt_least_load_sensitive", "NF-NCJT median changes least between 3 and 5 users/TRP (%)",
        sensitivity.get("nfncjt"),
        nf is not None and len(known) == len(SCHEMES) and all(nf < v for s, v in known.items() if s != "nfncjt"),
    ))

    def delta(max_coord, attr):
        return percent_change(q(GROUP_COORD, str(max_coord), attr), q(GROUP_COORD, str(SUITE_COORD[0]), attr))

    p5_3, p5_4 = delta(3, "p5"), delta(4, "p5")
    checks.append(CheckResult("coord3_cell_edge_gain", "p5 gain at max_coord=3 vs 2 (%)",
                              p5_3, p5_3 is not None and p5_3 > 0, (10.0, 50.0)))
    checks.append(CheckResult("coord4_cell_edge_gain", "p5 gain at max_coord=4 exceeds the gain at 3 (%)",
                              p5_4, p5_4 is not None and p5_3 is not None and p5_4 > p5_3, (25.0, 75.0)))
    for max_coord in SUITE_COORD[1:]:
        p95 = delta(max_coord, "p95")
        checks.append(CheckResult(f"coord{max_coord}_cell_centre_drop", f"p95 change at max_coord={max_coord} vs 2 (%)",
                                  p95, p95 is not None and p95 < 0, (-45.0, -15.0)))
        p50 = delta(max_coord, "p50")
        checks.append(CheckResult(f"coord{max_coord}_median_drop", f"median change at max_coord={max_coord} vs 2 (%)",
                                  p50, p50 is not None and p50 < 0, (-25.0, -5.0)))

    for c in checks:
        if not c.passed:
            logger.warning(f"Directional check missed: {c.name} ({c.detail}), value={c.value}")
        elif c.in_band is False:
            logger.warning(f"Directional check outside target band: {c.name}, value={c.value:.1f}, "
                           f"band={c.target}")
    return checks


@dataclass
class ExperimentReport:
    out: Path
    results: List[CellResult]
    checks: List[CheckResult] = field(default_factory=list)
    files: List[Path] = field(default_factory=list)


def run_experiment(config: RunConfig, suite: Optional[str] = None) -> ExperimentReport:
    """Run a single cell or the comparison suite and write every report file under config.run.out"""
    out = Path(config.run.out)
    cells = suite_cells(config) if suite == "paper" else [Cell(GROUP_SINGLE, config)]
    results = run_cells(cells, workers=config.run.workers)

    report = ExperimentReport(out=out, results=results)
    report.files.append(reports.write_resolved_config(config, out))
    report.files.append(reports.write_summary(results, out))
    for r in distinct(results):
        report.files.extend(reports.write_cell_files(r, out))
    report.files.append(reports.write_layout([c.config for c in cells], out))
    report.files.append(reports.write_utilisation(distinct(results), out))

    if suite == "paper":
        report.checks = directional_checks(results)
        report.files.append(reports.write_schemes(out))
        report.files.append(reports.write_comparison(comparison_rows(results), out))
        report.files.append(reports.write_checks(report.checks, out))

    for r in results:
        p = r.percentiles
        if p.absent:
            logger.warning(f"{r.cell.label}: no completed files after warm-up")
        else:
            logger.info(f"{r.cell.label}: p5={p.p5 / 1e6:.2f} p50={p.p50 / 1e6:.2f} "
                        f"p95={p.p95 / 1e6:.2f} Mbps over {p.count} files")
    logger.info(f"Wrote {len(report.files)} report files to {out}")
    return report
