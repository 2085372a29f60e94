"""A short Monte Carlo run comparing Lasso and GLS Lasso under AR(1) errors.

Run with ``python3 demos/small_monte_carlo.py``; it takes a few seconds.
"""

from __future__ import annotations

from glslasso import SimConfig
from glslasso.montecarlo import MetricsTable, cell_metrics, format_table1, format_table2, run_cell


def main() -> None:
    table = MetricsTable()
    for phi in (0.0, 0.9):
        cfg = SimConfig(T=100, p=50, phi=phi, seed=7)
        table.extend(cell_metrics(cfg, run_cell(cfg, 20)))
    print(format_table1(table))
    print(format_table2(table))


if __name__ == "__main__":
    main()
