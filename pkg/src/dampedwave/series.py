"""Time series of scalar diagnostics along a trajectory, with CSV round-trip."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

COLUMNS = ("t", "E", "I", "J", "L", "kinetic", "grad_sq", "lp_p", "l2_v", "grad_v_sq")
_INDEX = {name: i for i, name in enumerate(COLUMNS)}


@dataclass
class TimeSeries:
    """Rows of (t, E, I, J, L, kinetic, grad_sq, lp_p, l2_v, grad_v_sq)."""

    rows: list[tuple] = field(default_factory=list)

    def append(self, **kwargs) -> None:
        self.rows.append(tuple(float(kwargs[name]) for name in COLUMNS))

    def col(self, name: str) -> np.ndarray:
        idx = _INDEX[name]
        return np.array([row[idx] for row in self.rows])

    def __len__(self) -> int:
        return len(self.rows)

    def divergence_norm(self) -> np.ndarray:
        """||grad u||_2 + ||u_t||_2 per sample (the blow-up quantity)."""
        return np.sqrt(self.col("grad_sq")) + np.sqrt(self.col("l2_v"))

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(",".join(COLUMNS) + "\n")
            for row in self.rows:
                fh.write(",".join(f"{x:.17g}" for x in row) + "\n")

    @classmethod
    def read_csv(cls, path) -> "TimeSeries":
        with open(path) as fh:
            header = fh.readline().strip()
            if tuple(header.split(",")) != COLUMNS:
                raise ValueError(f"{path}: unexpected CSV header {header!r}")
            rows = [tuple(float(x) for x in line.split(","))
                    for line in fh if line.strip()]
        return cls(rows)

    @classmethod
    def from_arrays(cls, **cols) -> "TimeSeries":
        """Build a series from named arrays; missing columns default to 0."""
        k = len(next(iter(cols.values())))
        zeros = np.zeros(k)
        arrays = [np.asarray(cols.get(name, zeros), dtype=float) for name in COLUMNS]
        return cls([tuple(a[i] for a in arrays) for i in range(k)])
