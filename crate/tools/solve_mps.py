#!/usr/bin/env python3
"""Solve a vaxsite MPS export with scipy's MILP solver (HiGHS).

Usage:
    python3 tools/solve_mps.py model.mps solution.sol

Reads the free-format MPS files written by `vaxsite export-mps` and writes a
`name value` solution file that `vaxsite import-solution` accepts. Not a
general MPS reader: it covers the subset this toolkit emits (N/L/G/E rows,
MARKER integer fences, RHS, and UP/BV/FX/PL bounds).
"""

import sys

import numpy as np
from scipy import optimize, sparse


def parse_mps(path):
    objective_row = None
    row_sense = {}
    row_order = []
    columns = {}  # name -> {"integer": bool, "entries": {row: coeff}}
    column_order = []
    rhs = {}
    bounds = {}
    integer_mode = False

    with open(path) as handle:
        section = None
        for raw in handle:
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("*"):
                continue
            if not line[0].isspace():
                section = line.split()[0]
                continue
            fields = line.split()
            if section == "ROWS":
                sense, name = fields
                if sense == "N":
                    if objective_row is None:
                        objective_row = name
                else:
                    row_sense[name] = sense
                    row_order.append(name)
            elif section == "COLUMNS":
                if len(fields) >= 3 and fields[1].strip("'") == "MARKER":
                    integer_mode = fields[2].strip("'") == "INTORG"
                    continue
                name = fields[0]
                if name not in columns:
                    columns[name] = {"integer": integer_mode, "entries": {}}
                    column_order.append(name)
                for row, value in zip(fields[1::2], fields[2::2]):
                    columns[name]["entries"][row] = float(value)
            elif section == "RHS":
                for row, value in zip(fields[1::2], fields[2::2]):
                    rhs[row] = float(value)
            elif section == "BOUNDS":
                kind = fields[0]
                name = fields[2]
                if kind == "UP":
                    bounds.setdefault(name, [0.0, None])[1] = float(fields[3])
                elif kind == "LO":
                    bounds.setdefault(name, [0.0, None])[0] = float(fields[3])
                elif kind == "FX":
                    bounds[name] = [float(fields[3]), float(fields[3])]
                elif kind == "BV":
                    bounds[name] = [0.0, 1.0]
                    columns[name]["integer"] = True
                elif kind == "PL":
                    bounds.setdefault(name, [0.0, None])
                else:
                    raise SystemExit(f"unsupported bound kind {kind}")
    return objective_row, row_sense, row_order, columns, column_order, rhs, bounds


def main():
    if len(sys.argv) != 3:
        raise SystemExit(__doc__)
    mps_path, out_path = sys.argv[1], sys.argv[2]
    objective_row, row_sense, row_order, columns, column_order, rhs, bounds = parse_mps(mps_path)

    n = len(column_order)
    index = {name: i for i, name in enumerate(column_order)}
    cost = np.zeros(n)
    lower = np.zeros(n)
    upper = np.full(n, np.inf)
    integrality = np.zeros(n)
    for name in column_order:
        i = index[name]
        if columns[name]["integer"]:
            integrality[i] = 1
        if name in bounds:
            lo, hi = bounds[name]
            lower[i] = lo
            if hi is not None:
                upper[i] = hi
        cost[i] = columns[name]["entries"].get(objective_row, 0.0)

    rows = {name: k for k, name in enumerate(row_order)}
    m = len(row_order)
    lhs = np.full(m, -np.inf)
    rhs_vec = np.zeros(m)
    for name in row_order:
        k = rows[name]
        b = rhs.get(name, 0.0)
        sense = row_sense[name]
        if sense == "L":
            lhs[k], rhs_vec[k] = -np.inf, b
        elif sense == "G":
            lhs[k], rhs_vec[k] = b, np.inf
        else:
            lhs[k], rhs_vec[k] = b, b

    data, row_idx, col_idx = [], [], []
    for name in column_order:
        i = index[name]
        for row, coeff in columns[name]["entries"].items():
            if row == objective_row:
                continue
            data.append(coeff)
            row_idx.append(rows[row])
            col_idx.append(i)
    matrix = sparse.csr_matrix((data, (row_idx, col_idx)), shape=(m, n))

    result = optimize.milp(
        c=cost,
        constraints=optimize.LinearConstraint(matrix, lhs, rhs_vec),
        integrality=integrality,
        bounds=optimize.Bounds(lower, upper),
    )
    if not result.success:
        raise SystemExit(f"solver failed: {result.message}")

    with open(out_path, "w") as handle:
        handle.write(f"# solved by scipy.optimize.milp (HiGHS)\n")
        handle.write(f"# objective {result.fun!r}\n")
        for name in column_order:
            value = result.x[index[name]]
            if integrality[index[name]]:
                value = round(value)
            if value != 0.0:
                handle.write(f"{name} {value!r}\n")
    print(f"objective {result.fun!r} -> {out_path}")


if __name__ == "__main__":
    main()
