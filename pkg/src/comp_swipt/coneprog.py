"""Block-diagonal semidefinite programs in standard equality form.

    minimize    sum_j <C_j, X_j>
    subject to  sum_j <A_ij, X_j> = b_i,   i = 0..m-1
                X_j PSD for every block j

Blocks of dimension 1 are nonnegative scalars. Inequality constraints are
expressed by adding a dimension-1 slack block (ProgramBuilder does this), so
the stored program is always pure equality form; the original sense of each
row is kept for dual-sign bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded-below"
    MAX_ITERATIONS = "max-iterations"
    NUMERICAL_FAILURE = "numerical-failure"


@dataclass
class ConeProgram:
    block_dims: list[int]
    block_labels: list[str]
    c: list[np.ndarray]
    rows: list[dict[int, np.ndarray]]   # per row: block index -> coefficient
    b: np.ndarray
    row_labels: list[str]
    row_senses: list[str]               # "eq" | "le" | "ge" (sense before slack)

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float)
        if not (len(self.rows) == self.b.size == len(self.row_labels) == len(self.row_senses)):
            raise ValueError("inconsistent row counts")
        if not (len(self.block_dims) == len(self.block_labels) == len(self.c)):
            raise ValueError("inconsistent block counts")
        for j, (d, cj) in enumerate(zip(self.block_dims, self.c)):
            if cj.shape != (d, d):
                raise ValueError(f"objective block {j}: shape {cj.shape} != ({d},{d})")
            if not np.array_equal(cj, cj.T):
                raise ValueError(f"objective block {j} not symmetric")
        for i, row in enumerate(self.rows):
            for j, a in row.items():
                d = self.block_dims[j]
                if a.shape != (d, d):
                    raise ValueError(f"row {i} block {j}: shape {a.shape} != ({d},{d})")
                if not np.array_equal(a, a.T):
                    raise ValueError(f"row {i} block {j} not symmetric")

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def n_blocks(self) -> int:
        return len(self.block_dims)

    def row_index(self, label: str) -> int:
        return self.row_labels.index(label)

    def block_index(self, label: str) -> int:
        return self.block_labels.index(label)

    def objective_value(self, x: list[np.ndarray]) -> float:
        return float(sum(np.tensordot(cj, xj) for cj, xj in zip(self.c, x)))

    def apply_rows(self, x: list[np.ndarray]) -> np.ndarray:
        """A(X): the vector of constraint inner products."""
        out = np.zeros(self.n_rows)
        for i, row in enumerate(self.rows):
            out[i] = sum(np.tensordot(a, x[j]) for j, a in row.items())
        return out

    def apply_rows_adjoint(self, y: np.ndarray) -> list[np.ndarray]:
        """A^T(y): per-block sum of y_i A_ij."""
        out = [np.zeros((d, d)) for d in self.block_dims]
        for i, row in enumerate(self.rows):
            for j, a in row.items():
                out[j] = out[j] + y[i] * a
        return out


@dataclass
class ConeSolution:
    """Solver output: primal/dual iterates plus certificates of quality.

    ``gap_history`` records the complementarity gap <X, S> after every accepted
    iterate. ``status == OPTIMAL`` means the solve that produced the point met
    the requested tolerance on its own scale; when that solve was an internal
    rescaled retry, ``gap_rel`` is recomputed on the caller's scale and can sit
    somewhat above the tol. Check ``gap_rel``, not the status, when a specific
    accuracy matters.
    """

    x: list[np.ndarray]
    y: np.ndarray
    s: list[np.ndarray]
    primal_objective: float
    dual_objective: float
    gap_abs: float
    gap_rel: float
    iterations: int
    status: SolveStatus
    gap_history: list[float] = field(default_factory=list)
    message: str = ""


def dual_multiplier(prog: ConeProgram, sol: ConeSolution, label: str) -> float:
    """Lagrange multiplier of a named row, signed so inequality duals are >= 0.

    With a "le" row a'x + s = b the conventional multiplier is -y_i; with a
    "ge" row it is +y_i; "eq" rows return y_i as-is.
    """
    i = prog.row_index(label)
    y = float(sol.y[i])
    return -y if prog.row_senses[i] == "le" else y


def dual_slack(prog: ConeProgram, sol: ConeSolution, label: str) -> np.ndarray:
    """Dual slack block S_j for a named block (e.g. the PSD multiplier of X_j >= 0)."""
    return sol.s[prog.block_index(label)]


class ProgramBuilder:
    """Incremental construction with labels; converts inequalities to slacks."""

    def __init__(self):
        self._dims: list[int] = []
        self._labels: list[str] = []
        self._c: list[np.ndarray] = []
        self._rows: list[dict[int, np.ndarray]] = []
        self._b: list[float] = []
        self._row_labels: list[str] = []
        self._senses: list[str] = []

    def add_block(self, label: str, dim: int) -> int:
        if label in self._labels:
            raise ValueError(f"duplicate block label {label!r}")
        self._dims.append(int(dim))
        self._labels.append(label)
        self._c.append(np.zeros((dim, dim)))
        return len(self._dims) - 1

    def add_objective(self, block: int, coeff: np.ndarray):
        self._c[block] = self._c[block] + np.asarray(coeff, dtype=float)

    def add_constraint(self, label: str, coeffs: dict[int, np.ndarray], rhs: float,
                       sense: str = "eq") -> int:
        if sense not in ("eq", "le", "ge"):
            raise ValueError(f"bad sense {sense!r}")
        if label in self._row_labels:
            raise ValueError(f"duplicate row label {label!r}")
        row = {j: np.asarray(a, dtype=float) for j, a in coeffs.items()}
        if sense != "eq":
            sl = self.add_block(f"slack:{label}", 1)
            row[sl] = np.array([[1.0 if sense == "le" else -1.0]])
        self._rows.append(row)
        self._b.append(float(rhs))
        self._row_labels.append(label)
        self._senses.append(sense)
        return len(self._rows) - 1

    def build(self) -> ConeProgram:
        return ConeProgram(
            block_dims=list(self._dims),
            block_labels=list(self._labels),
            c=[cj.copy() for cj in self._c],
            rows=[{j: a.copy() for j, a in row.items()} for row in self._rows],
            b=np.array(self._b, dtype=float),
            row_labels=list(self._row_labels),
            row_senses=list(self._senses),
        )


@dataclass
class PresolveResult:
    program: ConeProgram
    dropped_rows: list[int]
    inconsistent: bool


def _flatten_rows(prog: ConeProgram) -> np.ndarray:
    total = sum(d * d for d in prog.block_dims)
    offs = np.concatenate([[0], np.cumsum([d * d for d in prog.block_dims])])
    mat = np.zeros((prog.n_rows, total))
    for i, row in enumerate(prog.rows):
        for j, a in row.items():
            mat[i, offs[j]:offs[j + 1]] = a.ravel()
    return mat

def presolve(prog: ConeProgram) -> PresolveResult:
    """Drop linearly dependent constraint rows; flag inconsistent dependencies.

    Uses a pivoted QR rank test on the flattened coefficient rows. A dropped
    row whose right-hand side disagrees with the span it lies in marks the
    program as structurally infeasible.
    """
    from scipy.linalg import qr

    if prog.n_rows == 0:
        return PresolveResult(prog, [], False)
    mat = _flatten_rows(prog)
    _, r, piv = qr(mat.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = max(mat.shape) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    rank = int(np.sum(diag > tol))
    if rank == prog.n_rows:
        return PresolveResult(prog, [], False)

    keep = sorted(piv[:rank])
    drop = sorted(set(range(prog.n_rows)) - set(keep))
    # Dependent rows must have consistent rhs: solve for coefficients on the
    # kept rows and compare b.
    inconsistent = False
    kept_mat = mat[keep]
    for i in drop:
        coef, *_ = np.linalg.lstsq(kept_mat.T, mat[i], rcond=None)
        if abs(float(coef @ prog.b[keep]) - prog.b[i]) > 1e-8 * (1 + abs(prog.b[i])):
            inconsistent = True
    reduced = ConeProgram(
        block_dims=list(prog.block_dims),
        block_labels=list(prog.block_labels),
        c=prog.c,
        rows=[prog.rows[i] for i in keep],
        b=prog.b[keep],
        row_labels=[prog.row_labels[i] for i in keep],
        row_senses=[prog.row_senses[i] for i in keep],
    )
    return PresolveResult(reduced, drop, inconsistent)


def dump_program(prog: ConeProgram, path) -> None:
    """Write a plain-text sparse-triplet dump for offline inspection.

    Line formats (whitespace separated):
        blocks <count>                  header
        dim <block> <size> <label>      one per block
        rows <count>                    header
        row <i> <sense> <rhs> <label>   one per row
        c <block> <r> <c> <value>       objective entries (nonzero only)
        a <row> <block> <r> <c> <value> constraint entries (nonzero only)
    """
    lines = [f"blocks {prog.n_blocks}"]
    for j, (d, lab) in enumerate(zip(prog.block_dims, prog.block_labels)):
        lines.append(f"dim {j} {d} {lab}")
    lines.append(f"rows {prog.n_rows}")
    for i, (sense, rhs, lab) in enumerate(zip(prog.row_senses, prog.b, prog.row_labels)):
        lines.append(f"row {i} {sense} {float(rhs)!r} {lab}")
    for j, cj in enumerate(prog.c):
        for r, cidx in zip(*np.nonzero(cj)):
            lines.append(f"c {j} {r} {cidx} {float(cj[r, cidx])!r}")
    for i, rowdict in enumerate(prog.rows):
        for j in sorted(rowdict):
            a = rowdict[j]
            for r, cidx in zip(*np.nonzero(a)):
                lines.append(f"a {i} {j} {r} {cidx} {float(a[r, cidx])!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def parse_dump(path) -> ConeProgram:
    """Rebuild a ConeProgram from dump_program output (testing aid)."""
    dims, labels, senses, row_labels = [], [], [], []
    b: list[float] = []
    c: list[np.ndarray] = []
    rows: list[dict[int, np.ndarray]] = []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            kind = parts[0]
            if kind == "dim":
                dims.append(int(parts[2]))
                labels.append(parts[3])
                c.append(np.zeros((int(parts[2]), int(parts[2]))))
            elif kind == "rows":
                rows = [dict() for _ in range(int(parts[1]))]
            elif kind == "row":
                senses.append(parts[2])
                b.append(float(parts[3]))
                row_labels.append(parts[4])
            elif kind == "c":
                j, r, cc, v = int(parts[1]), int(parts[2]), int(parts[3]), float(parts[4])
                c[j][r, cc] = v
            elif kind == "a":
                i, j = int(parts[1]), int(parts[2])
                r, cc, v = int(parts[3]), int(parts[4]), float(parts[5])
                if j not in rows[i]:
                    rows[i][j] = np.zeros((dims[j], dims[j]))
                rows[i][j][r, cc] = v
    return ConeProgram(dims, labels, c, rows, np.array(b), row_labels, senses)
