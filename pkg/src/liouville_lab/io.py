"""Text writers for grid fields and time series."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

OBSTACLE_FILL = -1.0


def write_vtk(field, path: str | Path, name: str = "u") -> None:
    """Legacy ASCII structured-points file; obstacle nodes carry ``OBSTACLE_FILL``."""
    mask = field.mask
    grid = field.full_grid(fill=OBSTACLE_FILL)
    n = len(mask.coords)
    lines = [
        "# vtk DataFile Version 3.0",
        f"{name} on masked grid h={mask.h:.6g}",
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {n} {n} 1",
        f"ORIGIN {mask.coords[0]:.10g} {mask.coords[0]:.10g} 0",
        f"SPACING {mask.h:.10g} {mask.h:.10g} 1",
        f"POINT_DATA {n * n}",
        f"SCALARS {name} double 1",
        "LOOKUP_TABLE default",
    ]
    # VTK wants x varying fastest; our arrays are indexed [ix, iy]
    vals = grid.T.ravel()
    lines.extend(f"{v:.10e}" for v in vals)
    lines.append("SCALARS kind int 1")
    lines.append("LOOKUP_TABLE default")
    lines.extend(str(int(k)) for k in mask.kind.T.ravel())
    Path(path).write_text("\n".join(lines) + "\n")


def write_field_csv(field, path: str | Path, name: str = "u") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", name])
        for x, y, v in zip(field.mask.active_x, field.mask.active_y, field.values):
            w.writerow([f"{x:.10g}", f"{y:.10g}", f"{v:.12e}"])


def write_series_csv(path: str | Path, columns: dict[str, np.ndarray]) -> None:
    names = list(columns)
    data = np.column_stack([np.asarray(columns[k], dtype=float) for k in names])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for row in data:
            w.writerow([f"{v:.12e}" for v in row])
