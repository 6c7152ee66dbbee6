"""A small dense SDP solver and the programs built on it.

Standard form handled by :func:`solve_sdp`::

    primal   min  sum_k <C_k, X_k>   s.t.  sum_k <A_{k,i}, X_k> = b_i,  X_k >= 0
    dual     max  b^T y              s.t.  C_k - sum_i y_i A_{k,i} = Z_k >= 0

For ``sense="max"`` the primal is maximized and the dual reads
``min b^T y  s.t.  sum_i y_i A_{k,i} - C_k >= 0``.

Complex Hermitian blocks are mapped to real symmetric blocks of twice the
size through ``M -> [[Re M, -Im M], [Im M, Re M]] / 2`` so the interior-point
core is real.  Iterations follow the infeasible primal-dual path-following
scheme with Nesterov-Todd scaling and a Mehrotra predictor-corrector step.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import DimensionError, PreconditionError, SolverError
from .matcore import as_matrix, is_hermitian, hermitize

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 200


# ---------------------------------------------------------------------------
# problem container


def _to_coo(M, n):
    if M is None:
        return sp.coo_matrix((n, n), dtype=complex)
    if sp.issparse(M):
        C = sp.coo_matrix(M, dtype=complex)
    else:
        C = sp.coo_matrix(np.asarray(M, dtype=complex))
    if C.shape != (n, n):
        raise DimensionError(f"coefficient of shape {C.shape} in a block of size {n}")
    return C


@dataclass(frozen=True, eq=False)
class SdpProblem:
    """Block SDP in standard form.

    ``operators[k]`` is a sparse ``m x n_k**2`` matrix whose row ``i`` holds
    ``A_{k,i}`` flattened in row-major order.  Use :meth:`from_constraints`
    to build one from explicit per-constraint matrices.
    """

    block_dims: tuple
    complex_blocks: tuple
    objective: tuple
    operators: tuple
    rhs: np.ndarray
    sense: str = "min"

    def __post_init__(self):
        if self.sense not in ("min", "max"):
            raise PreconditionError(f"unknown sense {self.sense!r}")
        m = len(self.rhs)
        for n, C, F, cplx in zip(self.block_dims, self.objective, self.operators,
                                 self.complex_blocks):
            if C.shape != (n, n) or F.shape != (m, n * n):
                raise DimensionError("block data inconsistent with block_dims")
            if not cplx and np.abs(np.asarray(C).imag).max(initial=0) > 0:
                raise PreconditionError("real block with complex objective")
        total = sum((2 * n if c else n) ** 2 for n, c in zip(self.block_dims, self.complex_blocks))
        if m > total:
            raise PreconditionError("more constraints than realified variables")

    @property
    def num_constraints(self):
        return len(self.rhs)

    def constraint(self, i):
        """Per-block coefficient matrices and right-hand side of constraint ``i``."""
        mats = [F.getrow(i).toarray().reshape(n, n)
                for n, F in zip(self.block_dims, self.operators)]
        return mats, float(self.rhs[i])

    @classmethod
    def from_constraints(cls, blocks, objective, constraints, sense="min",
                         complex_blocks=None):
        """Build from ``constraints = [(per-block matrices or None, rhs), ...]``."""
        blocks = tuple(int(n) for n in blocks)
        if complex_blocks is None:
            complex_blocks = tuple(True for _ in blocks)
        m = len(constraints)
        ops = []
        for k, n in enumerate(blocks):
            rows, cols, vals = [], [], []
            for i, (mats, _) in enumerate(constraints):
                C = _to_coo(mats[k] if mats is not None else None, n)
                rows.append(np.full(C.nnz, i))
                cols.append(C.row * n + C.col)
                vals.append(C.data)
            F = sp.csr_matrix((np.concatenate(vals) if vals else [],
                               (np.concatenate(rows) if rows else [],
                                np.concatenate(cols) if cols else [])),
                              shape=(m, n * n), dtype=complex)
            ops.append(F)
        obj = tuple(np.zeros((n, n), complex) if C is None else np.asarray(C, dtype=complex)
                    for n, C in zip(blocks, objective))
        rhs = np.array([float(r) for _, r in constraints])
        return cls(blocks, tuple(complex_blocks), obj, tuple(ops), rhs, sense)


@dataclass
class SdpSolution:
    """Result of :func:`solve_sdp`.

    ``X`` and ``Z`` are lists of per-block matrices (complex for complex
    blocks), ``y`` the dual vector.  ``gap`` is the relative duality gap
    ``|p - d| / (1 + |p| + |d|)``.
    """

    X: list
    y: np.ndarray
    Z: list
    primal_objective: float
    dual_objective: float
    gap: float
    status: str
    iterations: int
    primal_infeasibility: float
    dual_infeasibility: float
    history: list = field(default_factory=list)

    @property
    def value(self):
        return 0.5 * (self.primal_objective + self.dual_objective)


# ---------------------------------------------------------------------------
# realification


def _realify_dense(M, cplx):
    M = np.asarray(M, dtype=complex)
    if not cplx:
        return M.real.copy()
    re, im = M.real, M.imag
    return 0.5 * np.block([[re, -im], [im, re]])


def _realify_operator(F, n, cplx):
    F = sp.coo_matrix(F)
    if not cplx:
        return sp.csr_matrix((F.data.real, (F.row, F.col)), shape=(F.shape[0], n * n))
    r, c = np.divmod(F.col, n)
    v = F.data
    N = 2 * n
    re, im = 0.5 * v.real, 0.5 * v.imag
    rows = np.concatenate([F.row] * 4)
    cols = np.concatenate([r * N + c, (r + n) * N + (c + n), r * N + (c + n), (r + n) * N + c])
    vals = np.concatenate([re, re, -im, im])
    keep = vals != 0
    return sp.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=(F.shape[0], N * N))


def _unrealify(M, cplx, scale):
    if not cplx:
        return M.copy()
    n = M.shape[0] // 2
    re = M[:n, :n] + M[n:, n:]
    im = M[n:, :n] - M[:n, n:]
    return scale * (re + 1j * im)


# ---------------------------------------------------------------------------
# interior-point core


class _Workspace:
    """Private mutable state of one solve (real symmetric blocks)."""

    def __init__(self, dims, C, F, b):
        self.dims = dims
        self.C = C
        self.F = F
        self.Ft = [Fk.T.tocsr() for Fk in F]
        self.b = b
        self.m = len(b)
        self.nnz_rows = []
        for Fk, n in zip(F, dims):
            Fc = Fk.tocsr()
            Fc.sum_duplicates()
            self.nnz_rows.append(Fc)

    def A(self, X):
        out = np.zeros(self.m)
        for Fk, Xk in zip(self.F, X):
            out += Fk @ Xk.ravel()
        return out

    def At(self, y):
        return [(Ftk @ y).reshape(n, n) for Ftk, n in zip(self.Ft, self.dims)]

    def schur(self, W):
        m = self.m
        M = np.zeros((m, m))
        for Fk, Wk, n in zip(self.nnz_rows, W, self.dims):
            if Fk.nnz == 0:
                continue
            if n * n <= 1024:
                K = np.kron(Wk, Wk)
                M += Fk @ np.asarray(Fk @ K).T
                continue
            indptr, indices, data = Fk.indptr, Fk.indices, Fk.data
            counts = np.diff(indptr)
            active = np.nonzero(counts)[0]
            smax = counts.max()
            chunk = max(1, min(len(active), int(4e6 // max(n * n, 1))))
            for start in range(0, len(active), chunk):
                rows = active[start:start + chunk]
                c = len(rows)
                P = np.zeros((c, smax), dtype=np.int64)
                Q = np.zeros((c, smax), dtype=np.int64)
                V = np.zeros((c, smax))
                for t, i in enumerate(rows):
                    lo, hi = indptr[i], indptr[i + 1]
                    p, q = np.divmod(indices[lo:hi], n)
                    P[t, :hi - lo] = p
                    Q[t, :hi - lo] = q
                    V[t, :hi - lo] = data[lo:hi]
                # G_i = sum_s V[i,s] W[:, P[i,s]] W[Q[i,s], :]
                left = Wk[:, P] * V[None, :, :]          # n, c, s
                right = Wk[Q, :]                          # c, s, n
                G = np.einsum("acs,csb->cab", left, right, optimize=True)
                M[rows, :] += np.asarray(Fk @ G.reshape(c, n * n).T).T
        return (M + M.T) / 2


def _sym(M):
    return (M + M.T) / 2


def _nt_scaling(X, Z):
    wx, Qx = np.linalg.eigh(X)
    wz, Qz = np.linalg.eigh(Z)
    wx = np.clip(wx, 1e-300, None)
    wz = np.clip(wz, 1e-300, None)
    L = (Qx * np.sqrt(wx)) @ Qx.T
    R = (Qz * np.sqrt(wz)) @ Qz.T
    U, s, Vt = np.linalg.svd(R.T @ L)
    s = np.clip(s, 1e-300, None)
    G = L @ Vt.T / np.sqrt(s)[None, :]
    Ginv = (U.T @ R.T) / np.sqrt(s)[:, None]
    W = G @ G.T
    return G, Ginv, _sym(W), s


def _max_step(X, dX):
    w, Q = np.linalg.eigh(X)
    w = np.clip(w, 1e-300, None)
    Li = Q / np.sqrt(w)[None, :]
    T = _sym(Li.T @ dX @ Li)
    lmin = np.linalg.eigvalsh(T)[0]
    return math.inf if lmin >= 0 else -1.0 / lmin


def _cholesky(M):
    scale = max(np.abs(np.diag(M)).max(initial=0.0), 1e-300)
    for reg in (0.0, 1e-14, 1e-12, 1e-10):
        try:
            return sla.cho_factor(M + reg * scale * np.eye(len(M)), lower=False,
                                  check_finite=False)
        except (np.linalg.LinAlgError, sla.LinAlgError):
            continue
    return None


def _core(ws, tol, max_iter, trace_path):
    dims = ws.dims
    ntot = sum(dims)
    b = ws.b
    normb = 1 + np.linalg.norm(b)
    normC = 1 + math.sqrt(sum(np.sum(Ck * Ck) for Ck in ws.C))

    X, Z = [], []
    for k, n in enumerate(dims):
        Fk = ws.F[k]
        rownorm = np.sqrt(np.asarray(Fk.multiply(Fk).sum(axis=1)).ravel())
        act = rownorm > 0
        xi = max(10.0, math.sqrt(n))
        if act.any():
            xi = max(xi, n * np.max((1 + np.abs(b[act])) / (1 + rownorm[act])))
        eta = max(10.0, math.sqrt(n), np.linalg.norm(ws.C[k]),
                  rownorm.max(initial=0.0))
        X.append(xi * np.eye(n))
        Z.append(eta * np.eye(n))
    y = np.zeros(ws.m)

    history = []
    best = None
    status = "max_iter"
    it = 0
    writer = None
    fh = None
    if trace_path is not None:
        fh = open(trace_path, "w", newline="")
        writer = csv.writer(fh)
        writer.writerow(["iteration", "primal", "dual", "gap", "primal_infeas", "dual_infeas"])
    try:
        for it in range(max_iter + 1):
            AX = ws.A(X)
            rp = b - AX
            Aty = ws.At(y)
            Rd = [_sym(Ck - Zk - Ak) for Ck, Zk, Ak in zip(ws.C, Z, Aty)]
            pobj = sum(np.sum(Ck * Xk) for Ck, Xk in zip(ws.C, X))
            dobj = float(b @ y)
            xz = sum(np.sum(Xk * Zk) for Xk, Zk in zip(X, Z))
            mu = xz / ntot
            gap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
            pinf = np.linalg.norm(rp) / normb
            dinf = math.sqrt(sum(np.sum(R * R) for R in Rd)) / normC
            history.append((it, pobj, dobj, gap, pinf, dinf))
            if writer is not None:
                writer.writerow([it, repr(pobj), repr(dobj), repr(gap), repr(pinf), repr(dinf)])
            merit = max(gap, pinf, dinf)
            if best is None or merit < best[0]:
                best = (merit, [x.copy() for x in X], y.copy(), [z.copy() for z in Z],
                        pobj, dobj, gap, pinf, dinf, it)
            if gap <= tol and pinf <= tol and dinf <= tol:
                status = "optimal"
                break
            if abs(dobj) > 1 / tol and dinf <= max(tol, 1e-6) and abs(dobj) > 1e3 * (1 + abs(pobj)):
                status = "infeasible"
                break
            if abs(pobj) > 1 / tol and pinf <= max(tol, 1e-6) and abs(pobj) > 1e3 * (1 + abs(dobj)):
                status = "infeasible"
                break
            if it == max_iter:
                break

            scal = [_nt_scaling(Xk, Zk) for Xk, Zk in zip(X, Z)]
            W = [s[2] for s in scal]
            M = ws.schur(W)
            fac = _cholesky(M)
            if fac is None:
                raise SolverError("Schur complement is numerically singular",
                                  {"iteration": it, "gap": gap, "primal_infeas": pinf,
                                   "dual_infeas": dinf, "m": ws.m})
            WRW = [Wk @ Rk @ Wk for Wk, Rk in zip(W, Rd)]
            base = rp + ws.A(WRW)

            def direction(Rhat):
                rhs = base - ws.A(Rhat)
                dy = sla.cho_solve(fac, rhs, check_finite=False)
                Atdy = ws.At(dy)
                dZ = [_sym(Rk - Ak) for Rk, Ak in zip(Rd, Atdy)]
                dX = [_sym(Rh - Wk @ dZk @ Wk) for Rh, Wk, dZk in zip(Rhat, W, dZ)]
                return dX, dy, dZ

            def steps(dX, dZ):
                ap = min(_max_step(Xk, dXk) for Xk, dXk in zip(X, dX))
                ad = min(_max_step(Zk, dZk) for Zk, dZk in zip(Z, dZ))
                return ap, ad

            # predictor: dX + W dZ W = -X
            dXa, dya, dZa = direction([-Xk for Xk in X])
            ap, ad = steps(dXa, dZa)
            ap, ad = min(1.0, ap), min(1.0, ad)
            mu_aff = sum(np.sum((Xk + ap * dXk) * (Zk + ad * dZk))
                         for Xk, dXk, Zk, dZk in zip(X, dXa, Z, dZa)) / ntot
            sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0

            # corrector in the scaled space, where X and Z both become diag(s)
            Rhat = []
            for (G, Ginv, Wk, s), dXk, dZk in zip(scal, dXa, dZa):
                dXs = Ginv @ dXk @ Ginv.T
                dZs = G.T @ dZk @ G
                H = -(dXs @ dZs + dZs @ dXs) / 2
                H[np.diag_indices_from(H)] += sigma * mu - s * s
                Hs = 2 * H / (s[:, None] + s[None, :])
                Rhat.append(_sym(G @ Hs @ G.T))
            dX, dy, dZ = direction(Rhat)
            ap, ad = steps(dX, dZ)
            gamma = 0.9 + 0.09 * min(1.0, ap, ad)
            ap = min(1.0, gamma * ap)
            ad = min(1.0, gamma * ad)
            X = [_sym(Xk + ap * dXk) for Xk, dXk in zip(X, dX)]
            y = y + ad * dy
            Z = [_sym(Zk + ad * dZk) for Zk, dZk in zip(Z, dZ)]
    finally:
        if fh is not None:
            fh.close()

    if status != "optimal" and status != "infeasible" and best is not None:
        _, X, y, Z, pobj, dobj, gap, pinf, dinf, _ = best
    return X, y, Z, pobj, dobj, gap, pinf, dinf, status, it, history


def solve_sdp(p, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, trace_path=None):
    """Solve a :class:`SdpProblem`.

    Returns an :class:`SdpSolution`.  ``status`` is ``"optimal"`` when the
    relative gap and both residuals are below ``tol``, ``"max_iter"`` with the
    best iterate otherwise, and ``"infeasible"`` when one of the objectives
    diverges past ``1/tol``.  ``trace_path`` writes one CSV row per iteration.
    """
    sign = 1.0 if p.sense == "min" else -1.0
    dims, C, F = [], [], []
    for n, Ck, Fk, cplx in zip(p.block_dims, p.objective, p.operators, p.complex_blocks):
        Ck = np.asarray(Ck, dtype=complex)
        if not is_hermitian(Ck, 1e-10):
            raise PreconditionError("objective block is not Hermitian")
        dims.append(2 * n if cplx else n)
        C.append(sign * _realify_dense(hermitize(Ck), cplx))
        F.append(_realify_operator(Fk, n, cplx))
    ws = _Workspace(dims, C, F, np.asarray(p.rhs, dtype=float))
    X, y, Z, pobj, dobj, gap, pinf, dinf, status, it, hist = _core(ws, tol, max_iter, trace_path)
    Xc = [_unrealify(Xk, c, 0.5) for Xk, c in zip(X, p.complex_blocks)]
    Zc = [_unrealify(Zk, c, 1.0) for Zk, c in zip(Z, p.complex_blocks)]
    if sign < 0:
        y = -y
        Zc = [-Zk for Zk in Zc]
        pobj, dobj = -pobj, -dobj
    return SdpSolution(Xc, y, Zc, float(pobj), float(dobj), float(gap), status, it,
                       float(pinf), float(dinf), hist)


# ---------------------------------------------------------------------------
# linear-matrix-inequality front end


class LmiProgram:
    """``max/min c^T y`` over real ``y`` subject to affine PSD blocks.

    Each block is ``B_0 + sum_i y_i B_i >= 0``.  Blocks are added with
    :meth:`add_block`; coefficient matrices may be dense or scipy.sparse.
    """

    def __init__(self, num_vars):
        self.num_vars = int(num_vars)
        self._blocks = []

    def add_block(self, constant, coeffs, complex_block=True):
        """``coeffs`` is an iterable of ``(var_index, matrix)`` pairs."""
        C = np.asarray(constant, dtype=complex)
        n = C.shape[0]
        rows, cols, vals = [], [], []
        for i, B in coeffs:
            Bc = _to_coo(B, n)
            rows.append(np.full(Bc.nnz, int(i)))
            cols.append(Bc.row * n + Bc.col)
            vals.append(-Bc.data)
        if rows:
            F = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                              shape=(self.num_vars, n * n), dtype=complex)
        else:
            F = sp.csr_matrix((self.num_vars, n * n), dtype=complex)
        self._blocks.append((n, C, F, bool(complex_block)))
        return len(self._blocks) - 1

    def add_operator_block(self, constant, operator, complex_block=True):
        """Add a block from a ready ``num_vars x n**2`` operator (row-major)."""
        C = np.asarray(constant, dtype=complex)
        n = C.shape[0]
        F = -sp.csr_matrix(operator, dtype=complex)
        if F.shape != (self.num_vars, n * n):
            raise DimensionError("operator shape does not match the block")
        self._blocks.append((n, C, F, bool(complex_block)))
        return len(self._blocks) - 1

    def problem(self, c, sense="max"):
        c = np.asarray(c, dtype=float)
        if c.shape != (self.num_vars,):
            raise DimensionError("objective length differs from number of variables")
        dims = tuple(b[0] for b in self._blocks)
        cplx = tuple(b[3] for b in self._blocks)
        obj = tuple(b[1] for b in self._blocks)
        ops = tuple(b[2] for b in self._blocks)
        if sense == "max":
            return SdpProblem(dims, cplx, obj, ops, c, "min"), 1.0
        return SdpProblem(dims, cplx, tuple(-o for o in obj), ops, -c, "min"), -1.0

    def solve(self, c, sense="max", tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, trace_path=None):
        """Solve; the returned solution's ``y`` are the LMI variables.

        ``value`` of the solution is reported in the requested sense.
        """
        prob, sgn = self.problem(c, sense)
        sol = solve_sdp(prob, tol, max_iter, trace_path)
        if sgn < 0:
            sol.primal_objective, sol.dual_objective = -sol.primal_objective, -sol.dual_objective
            sol.Z = [-z for z in sol.Z]
        return sol

    def block_value(self, k, y):
        n, C, F, _ = self._blocks[k]
        return C - (F.T @ y).reshape(n, n)


# ---------------------------------------------------------------------------
# derived programs


def _traceless_basis(d):
    from .matcore import hermitian_basis
    B = hermitian_basis(d)
    # replace the diagonal units by a traceless orthonormal set
    diag = []
    for k in range(1, d):
        v = np.zeros(d)
        v[:k] = 1.0
        v[k] = -k
        v /= np.linalg.norm(v)
        diag.append(np.diag(v).astype(complex))
    return np.array(diag + list(B[d:])) if d > 1 else np.zeros((0, 1, 1), complex)


def diamond_norm(choi, dims=None, tol=1e-9, return_solution=False):
    """Diamond norm of a Hermiticity-preserving map given by its Choi matrix.

    ``choi`` follows the input-first convention ``sum_ij E_ij (x) Phi(E_ij)``
    and ``dims = (d_in, d_out)``.  Trace-annihilating maps (differences of
    channels) use the program ``2 max <J, W>`` over ``0 <= W <= rho (x) 1``;
    other maps use the two-state block program.
    """
    J = as_matrix(choi, square=True)
    if not is_hermitian(J, 1e-9):
        raise PreconditionError("diamond_norm needs a Hermitian Choi matrix")
    J = hermitize(J)
    N = J.shape[0]
    if dims is None:
        d = int(round(math.sqrt(N)))
        dims = (d, d)
    d_in, d_out = dims
    if d_in * d_out != N:
        raise DimensionError(f"dims {dims} do not match Choi size {N}")
    scale = max(np.abs(J).max(), 1e-300)
    Jn = J / scale
    TrOut = np.einsum("iaja->ij", Jn.reshape(d_in, d_out, d_in, d_out))
    I_out = np.eye(d_out)
    tl = _traceless_basis(d_in)
    if np.abs(TrOut).max() <= 1e-12:
        HB = _hermitian_coords(N)
        nW = len(HB)
        nr = len(tl)
        prog = LmiProgram(nW + nr)
        prog.add_operator_block(np.zeros((N, N)), _coord_operator(HB, N, 0, nW + nr))
        rest = [(nW + j, np.kron(tl[j], I_out)) for j in range(nr)]
        prog.add_operator_block(np.kron(np.eye(d_in) / d_in, I_out),
                                _coord_operator(HB, N, 0, nW + nr, sign=-1.0)
                                + _dense_coeffs(rest, N, nW + nr))
        # Tr(J H) for each basis element H
        c = np.concatenate([[np.real(np.sum(Jn[cc, r] * v)) for r, cc, v in HB], np.zeros(nr)])
        sol = prog.solve(c, "max", tol=tol)
        val = 2 * scale * sol.value
    else:
        nr = len(tl)
        HB = _hermitian_coords(N)
        # off-diagonal block X is a general complex N x N matrix: 2 N^2 real coordinates
        nX = 2 * N * N
        nv = 2 * nr + nX
        prog = LmiProgram(nv)
        rows, cols, vals = [], [], []
        idx = 0
        for j in range(nr):
            B = np.kron(tl[j], I_out)
            r, cc = np.nonzero(B)
            rows += [idx] * len(r); cols += list(r * 2 * N + cc); vals += list(B[r, cc])
            idx += 1
        for j in range(nr):
            B = np.kron(tl[j], I_out)
            r, cc = np.nonzero(B)
            rows += [idx] * len(r); cols += list((r + N) * 2 * N + cc + N); vals += list(B[r, cc])
            idx += 1
        c = np.zeros(nv)
        for a in range(N):
            for bb in range(N):
                # real part coordinate of X[a, b]
                rows += [idx, idx]
                cols += [a * 2 * N + (bb + N), (bb + N) * 2 * N + a]
                vals += [1.0, 1.0]
                c[idx] = np.real(Jn[a, bb])
                idx += 1
                rows += [idx, idx]
                cols += [a * 2 * N + (bb + N), (bb + N) * 2 * N + a]
                vals += [1j, -1j]
                c[idx] = np.imag(Jn[a, bb])
                idx += 1
        F = sp.csr_matrix((vals, (rows, cols)), shape=(nv, 4 * N * N), dtype=complex)
        const = np.kron(np.eye(2), np.kron(np.eye(d_in) / d_in, I_out))
        prog.add_operator_block(const, F)
        sol = prog.solve(c, "max", tol=tol)
        val = scale * sol.value
    if return_solution:
        return float(val), sol
    return float(val)


def _hermitian_coords(N):
    """Sparse description of the orthonormal Hermitian basis: list of (rows, cols, vals)."""
    out = []
    for k in range(N):
        out.append((np.array([k]), np.array([k]), np.array([1.0 + 0j])))
    s = 1 / math.sqrt(2)
    for k in range(N):
        for l in range(k + 1, N):
            out.append((np.array([k, l]), np.array([l, k]), np.array([s, s], dtype=complex)))
            out.append((np.array([k, l]), np.array([l, k]), np.array([-1j * s, 1j * s])))
    return out


def _coord_operator(HB, N, offset, nv, sign=1.0):
    rows, cols, vals = [], [], []
    for i, (r, c, v) in enumerate(HB):
        rows.append(np.full(len(r), offset + i))
        cols.append(r * N + c)
        vals.append(sign * v)
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(nv, N * N), dtype=complex)


def _dense_coeffs(pairs, N, nv):
    rows, cols, vals = [], [], []
    for i, B in pairs:
        r, c = np.nonzero(B)
        rows.append(np.full(len(r), i))
        cols.append(r * N + c)
        vals.append(B[r, c])
    if not rows:
        return sp.csr_matrix((nv, N * N), dtype=complex)
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(nv, N * N), dtype=complex)


def psd_gap(A, B):
    """Smallest eigenvalue of ``B - A``; ``A <= B`` iff the result is >= -tol."""
    A = as_matrix(A, square=True)
    B = as_matrix(B, square=True)
    if A.shape != B.shape:
        raise DimensionError(f"shapes {A.shape} and {B.shape} differ")
    D = B - A
    if not is_hermitian(D, 1e-8):
        raise PreconditionError("psd_gap needs Hermitian arguments")
    return float(np.linalg.eigvalsh(hermitize(D))[0])
