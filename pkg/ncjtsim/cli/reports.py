"""
Report files

Every output is a UTF-8 CSV with a header row. Column sets are fixed:

  summary.csv        group,label,scheme,users_per_trp,max_coord,seed_count,samples,p5,p50,p95 (bps)
  samples/<label>.csv seed,ue_id,file_bits,duration_s,throughput_bps
  cdf/<label>.csv    throughput_bps,probability
  layout.csv         max_coord,trp_id,x,y,z,comp_set
  utilisation.csv    label,seed,trp,transmitting,blank,idle,mean_layer_se,layers_per_prb
  schemes.csv        scheme,centralized,joint_precoder,fully_overlapped,user_data_sharing,csi_sharing
  comparison.csv     summary percentiles plus p5/p50/p95 deltas (%) against the group reference
  checks.csv         check,detail,value,status,target_low,target_high,in_band
"""

import logging
from dataclasses import asdict
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, List, Sequence

import pandas as pd

from ncjtsim.core.config import RunConfig
from ncjtsim.core.scheduler import SCHEME_PROPERTIES
from ncjtsim.core.stats import cdf_rows
from ncjtsim.core.topology import LayoutParams, build_indoor_layout, dump_layout_rows, form_comp_sets

if TYPE_CHECKING:
    from ncjtsim.cli.experiment import CellResult, CheckResult

logger = logging.getLogger("ncjtsim.reports")

SUMMARY_COLUMNS = ["group", "label", "scheme", "users_per_trp", "max_coord", "seed_count", "samples",
                   "p5", "p50", "p95"]
SAMPLE_COLUMNS = ["seed", "ue_id", "file_bits", "duration_s", "throughput_bps"]
CDF_COLUMNS = ["throughput_bps", "probability"]
LAYOUT_COLUMNS = ["max_coord", "trp_id", "x", "y", "z", "comp_set"]
UTILISATION_COLUMNS = ["label", "seed", "trp", "transmitting", "blank", "idle", "mean_layer_se", "layers_per_prb"]
SCHEME_COLUMNS = ["scheme", "centralized", "joint_precoder", "fully_overlapped", "user_data_sharing", "csi_sharing"]
COMPARISON_COLUMNS = ["group", "label", "scheme", "users_per_trp", "max_coord", "p5", "p50", "p95",
                      "p5_delta_pct", "p50_delta_pct", "p95_delta_pct"]
CHECK_COLUMNS = ["check", "detail", "value", "status", "target_low", "target_high", "in_band"]


def _write(rows: List[dict], columns: Sequence[str], path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(rows, columns=list(columns)).to_csv(path, index=False, encoding="utf-8")
    logger.debug(f"Wrote {len(rows)} rows to {path}")
    return path


def summary_rows(results: Iterable["CellResult"]) -> List[dict]:
    rows = []
    for r in results:
        p = r.percentiles
        run = r.cell.config.run
        rows.append({
            "group": r.cell.group, "label": r.cell.label, "scheme": run.scheme,
            "users_per_trp": run.users_per_trp, "max_coord": r.cell.config.effective_max_coord,
            "seed_count": len(run.seeds), "samples": p.count, "p5": p.p5, "p50": p.p50, "p95": p.p95,
        })
    return rows


def write_summary(results: Sequence["CellResult"], out: Path) -> Path:
    return _write(summary_rows(results), SUMMARY_COLUMNS, out / "summary.csv")


def write_cell_files(result: "CellResult", out: Path) -> List[Path]:
    """Per-cell sample dump and pooled CDF"""
    label = result.cell.label
    sample_rows = [{"seed": run.seed, **s.as_row()} for run in result.runs for s in run.samples]
    return [
        _write(sample_rows, SAMPLE_COLUMNS, out / "samples" / f"{label}.csv"),
        _write(cdf_rows(result.samples), CDF_COLUMNS, out / "cdf" / f"{label}.csv"),
    ]


def write_layout(configs: Iterable[RunConfig], out: Path) -> Path:
    """TRP coordinates with the CoMP-set id under each distinct max_coord"""
    rows, seen = [], set()
    for config in configs:
        max_coord = config.effective_max_coord
        if max_coord in seen:
            continue
        seen.add(max_coord)
        trps = build_indoor_layout(LayoutParams.from_config(config))
        for row in dump_layout_rows(trps, form_comp_sets(trps, max_coord)):
            rows.append({"max_coord": max_coord, **row})
    return _write(rows, LAYOUT_COLUMNS, out / "layout.csv")


def write_utilisation(results: Iterable["CellResult"], out: Path) -> Path:
    rows = []
    for r in results:
        for run in r.runs:
            util = run.utilisation
            for row in util.rows():
                rows.append({"label": r.cell.label, "seed": run.seed, **row,
                             "mean_layer_se": util.mean_layer_se,
                             "layers_per_prb": util.layers_per_scheduled_prb})
    return _write(rows, UTILISATION_COLUMNS, out / "utilisation.csv")


def write_schemes(out: Path) -> Path:
    rows = [{"scheme": name, **asdict(props)} for name, props in SCHEME_PROPERTIES.items()]
    return _write(rows, SCHEME_COLUMNS, out / "schemes.csv")


def write_comparison(rows: List[dict], out: Path) -> Path:
    return _write(rows, COMPARISON_COLUMNS, out / "comparison.csv")


def write_checks(checks: Iterable["CheckResult"], out: Path) -> Path:
    return _write([c.as_row() for c in checks], CHECK_COLUMNS, out / "checks.csv")


def write_resolved_config(config: RunConfig, out: Path) -> Path:
    path = out / "resolved_config.yaml"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(config.to_yaml(), encoding="utf-8")
    return path
