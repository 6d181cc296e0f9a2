"""Transfer functions on experiment grids and their solve reports.

A transfer function stores, per visited grid cell, the cocycle product
chain from the plan's start point (real Birkhoff sum, matrix product, or
sampled circle diffeomorphism), together with a normalization anchor that
is composed on the right lazily.  Keeping the anchor out of the stored
chains makes re-anchoring exact: two solves differing only in the anchor
share bitwise identical chain data.
"""

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from ..cocycle_core import (CircleDiffeo, diffeo_compose, identity,
                            monotone_repair)


class PooFailure(RuntimeError):
    """Periodic obstruction failed; the solve is refused, not approximated."""

    def __init__(self, message, witness=None, defect=None, period=None):
        super().__init__(message)
        self.witness = witness
        self.defect = defect
        self.period = period


class IllConditionedTransfer(RuntimeError):
    pass


class TransferFunction:
    """Grid-transported solution u of the coboundary equation.

    ``kind`` is one of "real", "linear", "circle".  ``first_visit`` maps a
    cell code to the orbit iterate whose value landed in the cell; the
    stored chain at that cell is the product over the first k steps, and
    the public value is chain composed with the anchor.  The anchor cell
    (the start point's cell, iterate 0) therefore holds exactly the anchor.
    """

    def __init__(self, kind: str, grid, codes, first_visit: dict, chain,
                 anchor, alpha: float, plan_desc: str = "", plan_N: int = 0,
                 G=None, anchor_is_identity: bool = False):
        self.kind = kind
        self.grid = grid
        self.codes = np.asarray(codes, dtype=np.int64)
        self.first_visit = first_visit
        self._row = {int(c): r for r, c in enumerate(self.codes)}
        self._chain = chain
        self.anchor = anchor
        self.alpha = float(alpha)
        self.holder_norm = None
        self.plan_desc = plan_desc
        self.plan_N = int(plan_N)
        self.G = G
        self._anchor_is_id = bool(anchor_is_identity)
        self._values = {}

    @property
    def n_cells(self) -> int:
        return len(self.codes)

    @property
    def coverage(self) -> float:
        return self.n_cells / max(self.grid.n_cells, 1)

    @property
    def anchor_code(self) -> int:
        # iterate 0 is a first visit of its own cell by construction
        for c, k in self.first_visit.items():
            if k == 0:
                return c
        raise RuntimeError("no anchor cell recorded")

    def has_cell(self, code) -> bool:
        return int(code) in self._row

    def cell_chain(self, code):
        """Raw chain element at the cell, anchor not applied."""
        r = self._row[int(code)]
        if self.kind == "real":
            return float(self._chain[r])
        if self.kind == "linear":
            return self._chain[r]
        lift, deriv = self._chain
        return CircleDiffeo(monotone_repair(lift[r].copy()), deriv[r].copy())

    def value(self, code):
        code = int(code)
        if code in self._values:
            return self._values[code]
        if self.kind == "real":
            out = float(self._chain[self._row[code]]) + self.anchor
        elif self.kind == "linear":
            out = self._chain[self._row[code]] @ self.anchor
        elif self._anchor_is_id or self.first_visit[code] != 0:
            chain = self.cell_chain(code)
            out = chain if self._anchor_is_id else diffeo_compose(chain,
                                                                  self.anchor)
        else:
            out = self.anchor   # identity chain: hold the anchor exactly
        self._values[code] = out
        return out

    def with_anchor(self, anchor):
        """Same chains, different normalization; None means the identity."""
        is_id = anchor is None
        if is_id:
            anchor = self._identity()
        out = TransferFunction(self.kind, self.grid, self.codes,
                               self.first_visit, self._chain, anchor,
                               self.alpha, self.plan_desc, self.plan_N,
                               G=self.G, anchor_is_identity=is_id)
        out.holder_norm = self.holder_norm
        return out

    def right_translated(self, h):
        if self.kind == "real":
            return self.with_anchor(self.anchor + h)
        if self.kind == "linear":
            return self.with_anchor(self.anchor @ h)
        return self.with_anchor(diffeo_compose(self.anchor, h))

    def _identity(self):
        if self.kind == "real":
            return 0.0
        if self.kind == "linear":
            return np.eye(self._chain.shape[1])
        return identity(self.G)


@dataclass
class SolveReport:
    """Residual audit of one solve; pass iff residual_C0 is within tolerance."""

    kind: str
    residual_C0: float
    residual_C1: float
    orbit_length_used: int
    n_cells: int
    tolerance: float
    holder_ratio: float | None = None
    worst_cell: int | None = None
    iterated: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.residual_C0 <= self.tolerance

    def summary(self) -> str:
        state = "pass" if self.passed else "FAIL"
        hr = "n/a" if self.holder_ratio is None else f"{self.holder_ratio:.3g}"
        return (f"{self.kind} solve {state}: residual_C0={self.residual_C0:.3e}"
                f" (tol {self.tolerance:.1e}), residual_C1="
                f"{self.residual_C1:.3e}, {self.n_cells} cells, "
                f"orbit length {self.orbit_length_used}, holder ratio {hr}")

    def to_json(self) -> str:
        doc = asdict(self)
        doc["passed"] = self.passed
        doc["iterated"] = {str(k): v for k, v in self.iterated.items()}
        return json.dumps(doc, indent=2, sort_keys=True)


def write_transfer_table(path, u: TransferFunction, report=None) -> None:
    """Grid table of u's values plus provenance and residual header lines.

    Circle transfers use the cocycle table column layout, so the file can
    be read back as a grid-table cocycle; the anchor is folded into the
    written values.
    """
    with open(path, "w") as fh:
        if u.kind == "circle":
            fh.write(f"# grid_size={u.G}\n")
        else:
            fh.write(f"# grid_size={u.grid.n_cells}\n")
        fh.write(f"# base_resolution={u.grid.describe()}\n")
        fh.write("# family_id=transfer_function\n")
        fh.write(f"# alpha={u.alpha!r}\n")
        fh.write(f"# kind={u.kind}\n")
        anchor = "identity" if u._anchor_is_id else "folded_into_values"
        if u.kind == "real":
            anchor = repr(float(u.anchor))
        fh.write(f"# anchor={anchor}\n")
        fh.write(f"# plan_seed={u.plan_desc}\n")
        fh.write(f"# plan_N={u.plan_N}\n")
        if report is not None:
            fh.write(f"# residual_C0={float(report.residual_C0)!r}\n")
            fh.write(f"# residual_C1={float(report.residual_C1)!r}\n")
        if u.kind == "real":
            fh.write("cell,value\n")
            for code in sorted(u._row):
                fh.write(f"{code},{float(u.value(code))!r}\n")
            return
        if u.kind == "linear":
            fh.write("cell,row,col,entry\n")
            for code in sorted(u._row):
                m = u.value(code)
                for i in range(m.shape[0]):
                    for j in range(m.shape[1]):
                        fh.write(f"{code},{i},{j},{float(m[i, j])!r}\n")
            return
        fh.write("cell,fiber_index,lift,derivative\n")
        for code in sorted(u._row):
            g = u.value(code)
            for j in range(g.G):
                fh.write(f"{code},{j},{float(g.lift[j])!r},"
                         f"{float(g.deriv[j])!r}\n")
