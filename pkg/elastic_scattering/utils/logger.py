"""
Results Logger and Reference Cache
Logs convergence rows, writes far-field / coefficient CSV files and caches
reference far fields for self-convergence studies
"""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence

import joblib
import pandas as pd

from .fields import FarField
from .solver import HarmonicCoefficients

logger = logging.getLogger(__name__)

CONVERGENCE_COLUMNS = (
    "geometry",
    "omega",
    "n",
    "err_ps",
    "err_pw",
    "vpw_dp_re",
    "vpw_dp_im",
    "t_coe",
    "t_sol",
)
ERROR_COLUMNS = ("err_ps", "err_pw")


class ConvergenceLogger:
    """Appends convergence rows to a CSV file and keeps them in memory"""

    def __init__(self, log_file: str | Path = "results/convergence.csv"):
        self.log_file = Path(log_file)
        self.rows: List[Dict] = []

        self.log_file.parent.mkdir(parents=True, exist_ok=True)
        self._load_rows()

    def _load_rows(self):
        """Load earlier rows from the CSV file"""
        if self.log_file.exists():
            try:
                df = pd.read_csv(self.log_file)
                self.rows = df.to_dict("records")
                logger.info("✅ Loaded %d convergence rows from %s", len(self.rows), self.log_file)
            except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
                logger.error("❌ Error loading convergence rows: %s", e)
                self.rows = []
        else:
            logger.info("📝 Creating new convergence log: %s", self.log_file)

    def log_result(self, row: Dict) -> Dict:
        """
        Append one result row

        Args:
            row: Mapping with any of the convergence columns; missing
                columns are written as empty cells
        """
        record = {column: row.get(column, math.nan) for column in CONVERGENCE_COLUMNS}
        self.rows.append(record)

        write_header = not self.log_file.exists() or self.log_file.stat().st_size == 0
        pd.DataFrame([record], columns=list(CONVERGENCE_COLUMNS)).to_csv(
            self.log_file,
            mode="a",
            header=write_header,
            index=False,
        )
        logger.debug("Logged row n=%s for %s", record["n"], record["geometry"])
        return record

    def get_summary(self) -> Dict:
        """Counts and best errors over everything logged so far"""
        if not self.rows:
            return {"rows": 0, "geometries": [], "best_err_ps": math.nan, "best_err_pw": math.nan}

        df = pd.DataFrame(self.rows)
        return {
            "rows": len(df),
            "geometries": sorted(df["geometry"].astype(str).unique().tolist()),
            "best_err_ps": float(df["err_ps"].min()),
            "best_err_pw": float(df["err_pw"].min()),
        }


def monotonicity_violations(rows: Sequence[Dict], column: str) -> List[int]:
    """Degrees n at which the error did not decrease from the previous row."""

    ordered = sorted(rows, key=lambda r: int(r["n"]))
    values = [(int(r["n"]), r.get(column, math.nan)) for r in ordered]
    values = [(n, float(v)) for n, v in values if v is not None and not pd.isna(v)]
    return [n for (_, previous), (n, current) in zip(values, values[1:]) if not current < previous]


def format_convergence_table(rows: Sequence[Dict]) -> str:
    """Fixed-width text table of n, the error columns present, and timings."""

    if not rows:
        raise ValueError("A convergence table needs at least one row.")

    ordered = sorted(rows, key=lambda r: int(r["n"]))
    errors = [c for c in ERROR_COLUMNS if any(not pd.isna(r.get(c, math.nan)) for r in ordered)]
    header = ["n"] + [f"||{c}||" for c in errors] + ["T_coe", "T_sol"]
    lines = [" ".join(f"{h:>12}" for h in header)]
    for r in ordered:
        cells = [f"{int(r['n']):>12d}"]
        cells += [_format_error(r.get(c, math.nan)) for c in errors]
        cells += [f"{float(r.get('t_coe', math.nan)):>12.2f}", f"{float(r.get('t_sol', math.nan)):>12.2f}"]
        lines.append(" ".join(cells))

    for column in errors:
        violations = monotonicity_violations(ordered, column)
        if violations:
            logger.warning("%s is not monotone decreasing at n=%s", column, violations)
            lines.append(f"! {column} not monotone decreasing at n = {', '.join(map(str, violations))}")
    return "\n".join(lines)


def _format_error(value) -> str:
    if value is None or pd.isna(value):
        return f"{'-':>12}"
    return f"{float(value):>12.4e}"


def write_farfield_csv(farfield: FarField, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    farfield.to_frame().to_csv(path, index=False, float_format="%.17g")
    logger.info("✅ Wrote far field (%d directions) to %s", farfield.theta.size, path)
    return path


def write_coefficients_csv(coeffs: HarmonicCoefficients, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    coeffs.to_frame().to_csv(path, index=False, float_format="%.17g")
    logger.info("✅ Wrote %d coefficients to %s", coeffs.to_vector().size, path)
    return path


class ReferenceCache:
    """On-disk joblib cache of reference far fields keyed by (geometry, omega, n*)"""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)

    def path_for(self, geometry: str, omega: float, reference_n: int) -> Path:
        return self.directory / f"reference_{geometry}_w{omega:.6g}_n{reference_n}.joblib"

    def load(self, geometry: str, omega: float, reference_n: int) -> Optional[FarField]:
        path = self.path_for(geometry, omega, reference_n)
        if not path.exists():
            return None
        try:
            cached = joblib.load(path)
        except Exception as e:
            logger.warning("Discarding unreadable reference cache %s: %s", path, e)
            return None
        if not isinstance(cached, FarField):
            logger.warning("Reference cache %s holds %s, ignoring it", path, type(cached).__name__)
            return None
        return cached

    def store(self, geometry: str, omega: float, reference_n: int, farfield: FarField) -> Path:
        path = self.path_for(geometry, omega, reference_n)
        path.parent.mkdir(parents=True, exist_ok=True)
        joblib.dump(farfield, path)
        logger.info("📝 Cached reference far field at %s", path)
        return path

    def get_or_compute(
        self,
        geometry: str,
        omega: float,
        reference_n: int,
        compute: Callable[[], FarField],
        expected_size: Optional[int] = None,
    ) -> FarField:
        cached = self.load(geometry, omega, reference_n)
        if cached is not None and expected_size is not None and cached.theta.size != expected_size:
            logger.warning("Cached reference has %d directions, expected %d", cached.theta.size, expected_size)
            cached = None
        if cached is not None:
            logger.info("Using cached reference far field for %s, omega=%.6g, n*=%d", geometry, omega, reference_n)
            return cached
        logger.warning("No reference far field cached for %s at n*=%d; computing it", geometry, reference_n)
        farfield = compute()
        self.store(geometry, omega, reference_n, farfield)
        return farfield


def rows_to_frame(rows: Iterable[Dict]) -> pd.DataFrame:
    return pd.DataFrame(list(rows), columns=list(CONVERGENCE_COLUMNS))


__all__ = [
    "CONVERGENCE_COLUMNS",
    "ConvergenceLogger",
    "monotonicity_violations",
    "format_convergence_table",
    "write_farfield_csv",
    "write_coefficients_csv",
    "ReferenceCache",
    "rows_to_frame",
]
