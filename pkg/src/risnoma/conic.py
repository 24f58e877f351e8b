"""Canonical conic-program representation with pluggable solvers.

Problems are linear objectives over named real variables plus at most
one Hermitian matrix block, with linear, second-order, exponential,
power, and PSD-cone constraints. The Hermitian block is handled through
its real symmetric embedding [[X, -Y], [Y, X]] of dimension 2n, so the
backends only ever see real cones.

Both backends consume the same Ax + s = b, s in K layout; they differ
in the PSD triangle stacking (clarabel: upper-column-major, scs:
lower-column-major, off-diagonals scaled by sqrt(2)) and in warm-start
support (scs only).
"""

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

RT2 = np.sqrt(2.0)

DEFAULT_EPS = 1e-8
DEFAULT_MAX_ITERS = 100_000

# embedded PSD dimension up to which the interior-point backend is preferred
AUTO_IPM_PSD_LIMIT = 90


# ------------------------------------------------------------- expressions

@dataclass
class LinExpr:
    """Sparse affine expression: sum(coefs * x[cols]) + const."""
    cols: np.ndarray
    coefs: np.ndarray
    const: float = 0.0

    @staticmethod
    def constant(c):
        return LinExpr(np.zeros(0, dtype=int), np.zeros(0), float(c))

    def __add__(self, other):
        if np.isscalar(other):
            return LinExpr(self.cols, self.coefs, self.const + float(other))
        return LinExpr(np.concatenate([self.cols, other.cols]),
                       np.concatenate([self.coefs, other.coefs]),
                       self.const + other.const)

    __radd__ = __add__

    def __neg__(self):
        return LinExpr(self.cols, -self.coefs, -self.const)

    def __sub__(self, other):
        if np.isscalar(other):
            return self + (-float(other))
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, scalar):
        return LinExpr(self.cols, self.coefs * float(scalar), self.const * float(scalar))

    __rmul__ = __mul__


class Var:
    """Handle to a block of real scalar variables."""

    def __init__(self, name, start, size):
        self.name = name
        self.start = start
        self.size = size

    def __getitem__(self, i) -> LinExpr:
        if not (0 <= i < self.size):
            raise IndexError(f"{self.name}[{i}] out of range")
        return LinExpr(np.array([self.start + i]), np.array([1.0]))

    def expr(self) -> LinExpr:
        if self.size != 1:
            raise ValueError(f"{self.name} is not scalar")
        return self[0]


class HermitianVar:
    """Handle to the Hermitian block, parameterized by n diagonal reals
    followed by (Re, Im) pairs of the upper triangle in column-major order."""

    def __init__(self, name, start, dim):
        self.name = name
        self.start = start
        self.dim = dim
        self.size = dim * dim

    def _pair_col(self, i, j):
        # i < j; pairs of column j precede it: j*(j-1)/2
        return self.start + self.dim + 2 * (j * (j - 1) // 2 + i)

    def trace_term(self, A) -> LinExpr:
        """Tr(A V) as an affine expression; A Hermitian (n x n)."""
        n = self.dim
        if A.shape != (n, n):
            raise ValueError(f"trace_term: shape {A.shape} != ({n},{n})")
        cols = [np.arange(self.start, self.start + n)]
        coefs = [np.real(np.diag(A)).astype(float)]
        for j in range(n):
            for i in range(j):
                c = self._pair_col(i, j)
                cols.append(np.array([c, c + 1]))
                coefs.append(np.array([2.0 * A[i, j].real, 2.0 * A[i, j].imag]))
        cols = np.concatenate(cols)
        coefs = np.concatenate(coefs)
        nz = coefs != 0.0
        return LinExpr(cols[nz], coefs[nz])

    def pack(self, V) -> np.ndarray:
        """Matrix -> parameter vector (inverse of unpack)."""
        n = self.dim
        x = np.zeros(self.size)
        x[:n] = np.real(np.diag(V))
        pos = n
        for j in range(n):
            for i in range(j):
                x[pos] = V[i, j].real
                x[pos + 1] = V[i, j].imag
                pos += 2
        return x

    def unpack(self, x) -> np.ndarray:
        """Parameter vector (local, length dim^2) -> Hermitian matrix."""
        n = self.dim
        V = np.zeros((n, n), dtype=complex)
        V[np.diag_indices(n)] = x[:n]
        pos = n
        for j in range(n):
            for i in range(j):
                V[i, j] = x[pos] + 1j * x[pos + 1]
                V[j, i] = x[pos] - 1j * x[pos + 1]
                pos += 2
        return V


# ------------------------------------------------- real symmetric embedding

def real_embedding(A) -> np.ndarray:
    """Hermitian n x n -> real symmetric 2n x 2n [[X, -Y], [Y, X]]."""
    X, Y = A.real, A.imag
    return np.block([[X, -Y], [Y, X]])


def from_real_embedding(M) -> np.ndarray:
    """Inverse of real_embedding (exact round-trip)."""
    n = M.shape[0] // 2
    return M[:n, :n] + 1j * M[n:, :n]


def _tri_positions(N, order):
    if order == "lower_col":
        return [(i, j) for j in range(N) for i in range(j, N)]
    if order == "upper_col":
        # recorded as (row >= col) of the symmetric matrix
        return [(j, i) for j in range(N) for i in range(j + 1)]
    raise ValueError(order)


_EMBED_CACHE = {}


def _embedding_triplets(herm: HermitianVar, order):
    """Sparse triplets mapping block parameters to svec(embedding)."""
    key = (herm.dim, order)
    if key in _EMBED_CACHE:
        rows, cols_local, vals, m = _EMBED_CACHE[key]
    else:
        n = herm.dim
        entries = []
        for r, (I, J) in enumerate(_tri_positions(2 * n, order)):
            sc = 1.0 if I == J else RT2
            if I < n and J < n:            # X block
                i, j = I, J
                if i == j:
                    entries.append((r, i, sc))
                else:
                    entries.append((r, n + 2 * (max(i, j) * (max(i, j) - 1) // 2 + min(i, j)), sc))
            elif I >= n and J < n:         # Y block, Y_ij = Im V_ij for i<j
                i, j = I - n, J
                if i != j:
                    col = n + 2 * (max(i, j) * (max(i, j) - 1) // 2 + min(i, j)) + 1
                    entries.append((r, col, sc if i < j else -sc))
            else:                          # X block again
                i, j = I - n, J - n
                if i == j:
                    entries.append((r, i, sc))
                else:
                    entries.append((r, n + 2 * (max(i, j) * (max(i, j) - 1) // 2 + min(i, j)), sc))
        m = n * (2 * n + 1)
        rows = np.array([e[0] for e in entries], dtype=int)
        cols_local = np.array([e[1] for e in entries], dtype=int)
        vals = np.array([e[2] for e in entries], dtype=float)
        _EMBED_CACHE[key] = (rows, cols_local, vals, m)
    return rows, cols_local + herm.start, vals, m


# ------------------------------------------------------------------ problem

@dataclass
class SolveOptions:
    backend: str = "auto"           # auto | clarabel | scs
    eps: float = DEFAULT_EPS
    max_iters: int = DEFAULT_MAX_ITERS
    verbose: bool = False
    warm: dict = None               # {"x":..., "y":..., "s":...} for scs


@dataclass
class ConicSolution:
    status: str                     # optimal | infeasible | numerical-failure
    obj_val: float = np.nan
    values: dict = field(default_factory=dict)
    iterations: int = 0
    solve_time: float = 0.0
    backend: str = ""
    inaccurate: bool = False
    raw: dict = None                # x/y/s for warm starting

    @property
    def ok(self):
        return self.status == "optimal"


class ConicProblem:
    """Builder for one conic program; assemble once, solve per backend."""

    def __init__(self, name="conic"):
        self.name = name
        self.ncols = 0
        self.vars = {}
        self.herm = None
        self.obj = LinExpr.constant(0.0)
        # (kind, data) rows in insertion order per block family
        self._eq = []        # (expr, rhs)
        self._ineq = []      # (expr, rhs) meaning expr <= rhs
        self._soc = []       # list of [head, t1, t2, ...] LinExprs
        self._psd = False
        self._exp = []       # (u, w): u <= ln(w)
        self._pow = []       # (x, y, z, alpha)

    # ---------------- variables
    def real_var(self, name, size=1, lb=None, ub=None) -> Var:
        if name in self.vars:
            raise ValueError(f"duplicate variable {name}")
        v = Var(name, self.ncols, size)
        self.ncols += size
        self.vars[name] = v
        if lb is not None:
            for i in range(size):
                self.add_ineq(-v[i], -float(lb))
        if ub is not None:
            for i in range(size):
                self.add_ineq(v[i], float(ub))
        return v

    def hermitian_var(self, name, dim) -> HermitianVar:
        if self.herm is not None:
            raise ValueError("only one Hermitian block is supported")
        h = HermitianVar(name, self.ncols, dim)
        self.ncols += h.size
        self.vars[name] = h
        self.herm = h
        return h

    # ---------------- objective / constraints
    def minimize(self, expr: LinExpr):
        self.obj = expr

    def add_eq(self, expr, rhs=0.0):
        self._eq.append((expr, float(rhs)))

    def add_ineq(self, expr, rhs=0.0):
        self._ineq.append((expr, float(rhs)))

    def add_soc(self, head, tail):
        self._soc.append([head] + list(tail))

    def add_quad_le(self, x, t, s):
        """x^2 <= t*s with t, s >= 0, as ||(2x, t-s)|| <= t+s."""
        self.add_soc(t + s, [x * 2.0, t - s])

    def add_log_lb(self, u, w):
        """u <= ln(w) via the exponential cone."""
        self._exp.append((u, w))

    def add_pow(self, x, y, z, alpha):
        """x^alpha * y^(1-alpha) >= |z| with x, y >= 0."""
        if not (0.0 < alpha < 1.0):
            raise ValueError("alpha must be in (0,1)")
        self._pow.append((x, y, z, float(alpha)))

    def add_psd(self):
        if self.herm is None:
            raise ValueError("no Hermitian block declared")
        self._psd = True

    # ---------------- assembly
    def _assemble(self, order):
        rows_i, rows_j, rows_v, bvals = [], [], [], []
        nrow = 0

        def put(expr, rhs):
            nonlocal nrow
            rows_i.extend([nrow] * expr.cols.size)
            rows_j.extend(expr.cols.tolist())
            rows_v.extend(expr.coefs.tolist())
            bvals.append(rhs - expr.const)
            nrow += 1

        for expr, rhs in self._eq:
            put(expr, rhs)
        n_zero = nrow
        for expr, rhs in self._ineq:
            put(expr, rhs)
        n_nn = nrow - n_zero
        soc_sizes = []
        for block in self._soc:
            for e in block:
                put(-e, 0.0)   # slack equals the expression itself
            soc_sizes.append(len(block))
        m_psd = 0
        if self._psd:
            er, ec, ev, m_psd = _embedding_triplets(self.herm, order)
            rows_i.extend((nrow + er).tolist())
            rows_j.extend(ec.tolist())
            rows_v.extend((-ev).tolist())
            bvals.extend([0.0] * m_psd)
            nrow += m_psd
        for u, w in self._exp:
            for e in (u, LinExpr.constant(1.0), w):
                put(-e, 0.0)
        for x, y, z, _ in self._pow:
            for e in (x, y, z):
                put(-e, 0.0)

        A = sp.csc_matrix((rows_v, (rows_i, rows_j)), shape=(nrow, self.ncols))
        b = np.asarray(bvals)
        q = np.zeros(self.ncols)
        np.add.at(q, self.obj.cols, self.obj.coefs)
        meta = dict(n_zero=n_zero, n_nn=n_nn, soc=soc_sizes, m_psd=m_psd,
                    psd_dim=(2 * self.herm.dim if self._psd else 0),
                    n_exp=len(self._exp), pow_alphas=[p[3] for p in self._pow])
        return q, A, b, meta

    # ---------------- solving
    def solve(self, opts: SolveOptions = None) -> ConicSolution:
        opts = opts or SolveOptions()
        backend = opts.backend
        if backend == "auto":
            big_psd = self._psd and 2 * self.herm.dim > AUTO_IPM_PSD_LIMIT
            backend = "scs" if big_psd else "clarabel"
        if backend == "clarabel":
            sol = self._solve_clarabel(opts)
        elif backend == "scs":
            sol = self._solve_scs(opts)
        else:
            raise ValueError(f"unknown backend {backend}")
        return sol

    def _extract(self, x):
        vals = {}
        for name, v in self.vars.items():
            if isinstance(v, HermitianVar):
                vals[name] = v.unpack(x[v.start:v.start + v.size])
            else:
                vals[name] = x[v.start:v.start + v.size].copy()
        return vals

    def _solve_clarabel(self, opts):
        import clarabel

        q, A, b, meta = self._assemble("upper_col")
        cones = []
        if meta["n_zero"]:
            cones.append(clarabel.ZeroConeT(meta["n_zero"]))
        if meta["n_nn"]:
            cones.append(clarabel.NonnegativeConeT(meta["n_nn"]))
        for ssz in meta["soc"]:
            cones.append(clarabel.SecondOrderConeT(ssz))
        if meta["m_psd"]:
            cones.append(clarabel.PSDTriangleConeT(meta["psd_dim"]))
        for _ in range(meta["n_exp"]):
            cones.append(clarabel.ExponentialConeT())
        for al in meta["pow_alphas"]:
            cones.append(clarabel.PowerConeT(al))

        settings = clarabel.DefaultSettings()
        settings.verbose = opts.verbose
        settings.max_iter = min(int(opts.max_iters), 500)
        for attr in ("tol_gap_abs", "tol_gap_rel", "tol_feas"):
            setattr(settings, attr, opts.eps)

        t0 = time.time()
        try:
            solver = clarabel.DefaultSolver(
                sp.csc_matrix((self.ncols, self.ncols)), q, A, b, cones, settings)
            res = solver.solve()
        except Exception:   # backend crash surfaces as a status, not a traceback
            return ConicSolution(status="numerical-failure", backend="clarabel",
                                 solve_time=time.time() - t0)
        dt = time.time() - t0
        st = str(res.status)
        if st in ("Solved", "AlmostSolved"):
            x = np.asarray(res.x)
            return ConicSolution(status="optimal", obj_val=float(res.obj_val) + self.obj.const,
                                 values=self._extract(x), iterations=int(res.iterations),
                                 solve_time=dt, backend="clarabel",
                                 inaccurate=(st == "AlmostSolved"),
                                 raw=dict(x=x))
        if "Infeasible" in st:
            return ConicSolution(status="infeasible", backend="clarabel",
                                 iterations=int(res.iterations), solve_time=dt)
        return ConicSolution(status="numerical-failure", backend="clarabel",
                             iterations=int(res.iterations), solve_time=dt)

    def _solve_scs(self, opts):
        import scs

        q, A, b, meta = self._assemble("lower_col")
        cone = {}
        if meta["n_zero"]:
            cone["z"] = meta["n_zero"]
        if meta["n_nn"]:
            cone["l"] = meta["n_nn"]
        if meta["soc"]:
            cone["q"] = meta["soc"]
        if meta["m_psd"]:
            cone["s"] = [meta["psd_dim"]]
        if meta["n_exp"]:
            cone["ep"] = meta["n_exp"]
        if meta["pow_alphas"]:
            cone["p"] = meta["pow_alphas"]

        t0 = time.time()
        solver = scs.SCS(dict(A=A, b=b, c=q), cone, verbose=opts.verbose,
                         eps_abs=opts.eps, eps_rel=opts.eps,
                         max_iters=int(opts.max_iters))
        warm = opts.warm
        if warm and "x" in warm and warm["x"].shape[0] == self.ncols:
            x0 = warm["x"]
            y0 = warm.get("y")
            if y0 is None or y0.shape[0] != b.shape[0]:
                y0 = np.zeros(b.shape[0])
            s0 = warm.get("s")
            if s0 is None or s0.shape[0] != b.shape[0]:
                # valid when x0 is primal feasible (s lands inside the cone)
                s0 = b - A @ x0
            out = solver.solve(warm_start=True, x=x0, y=y0, s=s0)
        else:
            out = solver.solve()
        dt = time.time() - t0
        info = out["info"]
        st = info["status"]
        if "solved" in st:
            x = out["x"]
            return ConicSolution(status="optimal", obj_val=float(info["pobj"]) + self.obj.const,
                                 values=self._extract(x), iterations=int(info["iter"]),
                                 solve_time=dt, backend="scs",
                                 inaccurate=("inaccurate" in st),
                                 raw=dict(x=x, y=out["y"], s=out["s"]))
        if "infeasible" in st:
            return ConicSolution(status="infeasible", backend="scs",
                                 iterations=int(info["iter"]), solve_time=dt)
        return ConicSolution(status="numerical-failure", backend="scs",
                             iterations=int(info["iter"]), solve_time=dt)

    # ---------------- debugging dump
    def dump(self, path):
        """Write the assembled problem as documented plain text."""
        q, A, b, meta = self._assemble("lower_col")
        Ac = A.tocoo()
        with open(path, "w") as fh:
            fh.write(f"# conic problem dump: {self.name}\n")
            fh.write(f"ncols {self.ncols}\nnrows {A.shape[0]}\n")
            fh.write(f"cones zero={meta['n_zero']} nonneg={meta['n_nn']} "
                     f"soc={meta['soc']} psd_dim={meta['psd_dim']} "
                     f"exp={meta['n_exp']} pow={meta['pow_alphas']}\n")
            fh.write("objective_const {:.17g}\n".format(self.obj.const))
            fh.write("# objective: col value\n")
            for c, v in zip(self.obj.cols, self.obj.coefs):
                fh.write(f"c {c} {v:.17g}\n")
            fh.write("# matrix triplets (psd rows in lower-col svec order): row col value\n")
            for r, c, v in zip(Ac.row, Ac.col, Ac.data):
                fh.write(f"A {r} {c} {v:.17g}\n")
            fh.write("# rhs: row value\n")
            for r, v in enumerate(b):
                fh.write(f"b {r} {v:.17g}\n")
