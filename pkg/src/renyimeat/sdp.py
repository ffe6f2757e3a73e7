"""A small dense-block semidefinite solver.

Problems are stated over named Hermitian PSD blocks with real linear
equality constraints

    min/max  sum_b <C_b, X_b>   s.t.   sum_b <M_b^(k), X_b> = r_k,   X_b >= 0,

where <A, B> = tr[A^dag B].  Operator inequalities ``sum_b L_b(X_b) >= G``
are lowered to a slack block plus equalities via ``add_operator_inequality``.

The solver is a primal log-barrier interior-point method on the Hermitian
real vectorization: Newton centering steps on t*<c,x> - sum_b logdet(X_b)
with equality constraints kept by a KKT system, mu-reduction factor 0.2,
stopping once the barrier duality gap sum_b dim(X_b)/t drops below
``gap_tol`` times the value scale.  Dual variables come for free at a
centered point: y = -nu/t from the KKT multipliers and S_b = X_b^{-1}/t,
which certifies the value through weak duality.

Blocks here are small (<= ~20x20 after slack lowering), so everything is
dense and exact constraint reductions are built basis element by basis
element.  Strictly feasible starts are expected from the problem builders
(every family used in this package has an explicit interior point); a
least-squares fallback is attempted otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg

from .errors import InfeasibleSpec, InvalidState, SolverFailure
from .registers import RegisterSpace, State

GAP_TOL = 1e-8
MU_REDUCTION = 0.2


# ----------------------------------------------------- Hermitian vectorization

@lru_cache(maxsize=None)
def hermitian_basis_matrix(n: int) -> np.ndarray:
    """Columns are row-major vec's of an orthonormal Hermitian basis of C^{nxn}.

    Order: n diagonal units, then for each i<j the real pair (E_ij+E_ji)/sqrt2
    followed by the imaginary pair i(E_ij-E_ji)/sqrt2.
    """
    cols = []
    for i in range(n):
        E = np.zeros((n, n), dtype=complex)
        E[i, i] = 1.0
        cols.append(E.reshape(-1))
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    for i in range(n):
        for j in range(i + 1, n):
            E = np.zeros((n, n), dtype=complex)
            E[i, j] = inv_sqrt2
            E[j, i] = inv_sqrt2
            cols.append(E.reshape(-1))
            E = np.zeros((n, n), dtype=complex)
            E[i, j] = 1j * inv_sqrt2
            E[j, i] = -1j * inv_sqrt2
            cols.append(E.reshape(-1))
    return np.stack(cols, axis=1)


def hvec(mat: np.ndarray) -> np.ndarray:
    """Real coordinates of a Hermitian matrix in the orthonormal basis."""
    n = mat.shape[0]
    B = hermitian_basis_matrix(n)
    return np.real(B.conj().T @ np.asarray(mat, dtype=complex).reshape(-1))


def hunvec(v: np.ndarray, n: int) -> np.ndarray:
    B = hermitian_basis_matrix(n)
    return (B @ np.asarray(v, dtype=float)).reshape(n, n)


def hermitian_basis(n: int):
    """Iterate the basis elements as matrices (same order as the columns)."""
    B = hermitian_basis_matrix(n)
    for k in range(n * n):
        yield B[:, k].reshape(n, n)


# ----------------------------------------------------------- problem container

def _as_herm(mat, dim, what) -> np.ndarray:
    m = np.asarray(mat, dtype=complex)
    if m.shape != (dim, dim):
        raise InvalidState(f"{what}: expected shape {(dim, dim)}, got {m.shape}")
    if np.linalg.norm(m - m.conj().T) > 1e-9 * max(1.0, np.linalg.norm(m)):
        raise InvalidState(f"{what}: matrix is not Hermitian")
    return 0.5 * (m + m.conj().T)


class SdpProblem:
    """Block-diagonal SDP in equality standard form (see module docstring)."""

    def __init__(self, sense: str = "min"):
        if sense not in ("min", "max"):
            raise InvalidState("sense must be 'min' or 'max'")
        self.sense = sense
        self.blocks: dict[str, int] = {}
        self.objective: dict[str, np.ndarray] = {}
        self.constraints: list[tuple[dict[str, np.ndarray], float]] = []

    def add_block(self, name: str, dim: int) -> None:
        if name in self.blocks:
            raise InvalidState(f"duplicate block {name!r}")
        if dim < 1:
            raise InvalidState("block dimension must be >= 1")
        self.blocks[name] = int(dim)

    def add_objective(self, name: str, C) -> None:
        C = _as_herm(C, self.blocks[name], f"objective[{name}]")
        if name in self.objective:
            self.objective[name] = self.objective[name] + C
        else:
            self.objective[name] = C

    def add_eq_constraint(self, mats: dict, rhs: float) -> None:
        clean = {}
        for name, M in mats.items():
            if name not in self.blocks:
                raise InvalidState(f"unknown block {name!r}")
            clean[name] = _as_herm(M, self.blocks[name], f"constraint[{name}]")
        self.constraints.append((clean, float(rhs)))

    def add_operator_inequality(self, terms, G, *, slack: str,
                                sense: str = ">=") -> None:
        """Lower ``sum_b L_b(X_b) >= G`` (or <=) to a PSD slack block.

        ``terms`` is a list of ``(block_name, adjoint_fn)``; ``adjoint_fn(E)``
        must return the matrix ``M`` with ``<E, L_b(X)> = <M, X>`` for every
        Hermitian ``E`` on the slack space.
        """
        G = np.asarray(G, dtype=complex)
        n = G.shape[0]
        G = _as_herm(G, n, "inequality rhs")
        sign = 1.0 if sense == ">=" else -1.0
        self.add_block(slack, n)
        for E in hermitian_basis(n):
            mats = {slack: -sign * E}
            for name, adj in terms:
                M = adj(E)
                if name in mats:
                    mats[name] = mats[name] + M
                else:
                    mats[name] = M
            self.add_eq_constraint(mats, float(np.real(np.trace(E.conj().T @ G))))

    # -- serialization (audit dumps) --------------------------------------

    def to_jsonable(self) -> dict:
        return {
            "sense": self.sense,
            "blocks": dict(self.blocks),
            "objective": {k: _mat_to_jsonable(v) for k, v in self.objective.items()},
            "constraints": [
                {"mats": {k: _mat_to_jsonable(v) for k, v in mats.items()},
                 "rhs": rhs}
                for mats, rhs in self.constraints
            ],
        }

    @classmethod
    def from_jsonable(cls, data: dict) -> "SdpProblem":
        p = cls(sense=data["sense"])
        for name, dim in data["blocks"].items():
            p.add_block(name, int(dim))
        for name, m in data["objective"].items():
            p.add_objective(name, _mat_from_jsonable(m))
        for c in data["constraints"]:
            p.add_eq_constraint({k: _mat_from_jsonable(v)
                                 for k, v in c["mats"].items()}, c["rhs"])
        return p


def _mat_to_jsonable(mat: np.ndarray) -> dict:
    m = np.asarray(mat)
    return {"re": np.real(m).tolist(), "im": np.imag(m).tolist()}


def _mat_from_jsonable(data: dict) -> np.ndarray:
    return np.array(data["re"], dtype=float) + 1j * np.array(data["im"], dtype=float)


# ------------------------------------------------------- adjoint-map helpers

def embed_adjoint(ambient: RegisterSpace, labels):
    """Adjoint of X -> (X on `labels`) tensor identity, inside ``ambient``.

    Returns a function mapping a Hermitian E on ``ambient`` to its partial
    trace onto ``labels`` (legs ordered as given).
    """
    labels = list(labels)

    def adj(E: np.ndarray) -> np.ndarray:
        st = State(E, ambient, check=False)
        red = st.partial_trace(keep=labels)
        if list(red.space.labels) != labels:
            red = red.reorder(labels)
        return red.matrix

    return adj


def scale_adjoint(M0: np.ndarray):
    """Adjoint of the map t (1x1 block) -> t * M0."""
    M0 = np.asarray(M0, dtype=complex)

    def adj(E: np.ndarray) -> np.ndarray:
        return np.array([[np.real(np.trace(E.conj().T @ M0))]], dtype=complex)

    return adj


# ------------------------------------------------------------------- solution

@dataclass
class SdpSolution:
    value: float
    dual_value: float
    gap: float
    variables: dict = field(repr=False)
    dual_slacks: dict = field(repr=False)
    y: np.ndarray = field(repr=False)
    residuals: dict = field(default_factory=dict)
    iterations: int = 0

    def to_jsonable(self) -> dict:
        return {
            "value": self.value,
            "dual_value": self.dual_value,
            "gap": self.gap,
            "variables": {k: _mat_to_jsonable(v) for k, v in self.variables.items()},
            "dual_slacks": {k: _mat_to_jsonable(v)
                            for k, v in self.dual_slacks.items()},
            "y": list(map(float, self.y)),
            "residuals": {k: float(v) for k, v in self.residuals.items()},
            "iterations": self.iterations,
        }


# --------------------------------------------------------------------- solver

def _assemble(problem: SdpProblem):
    names = list(problem.blocks)
    dims = [problem.blocks[n] for n in names]
    sizes = [d * d for d in dims]
    offs = np.concatenate([[0], np.cumsum(sizes)])
    N = int(offs[-1])
    sgn = 1.0 if problem.sense == "min" else -1.0
    c = np.zeros(N)
    for i, name in enumerate(names):
        if name in problem.objective:
            c[offs[i]:offs[i + 1]] = sgn * hvec(problem.objective[name])
    m = len(problem.constraints)
    A = np.zeros((m, N))
    b = np.zeros(m)
    for k, (mats, rhs) in enumerate(problem.constraints):
        b[k] = rhs
        for i, name in enumerate(names):
            if name in mats:
                A[k, offs[i]:offs[i + 1]] = hvec(mats[name])
    return names, dims, offs, A, b, c, sgn


def _split(x, names, dims, offs):
    out = {}
    for i, name in enumerate(names):
        out[name] = hunvec(x[offs[i]:offs[i + 1]], dims[i])
    return out


def _min_eig(mat: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (mat + mat.conj().T)).min())


def _refined_inverse(X: np.ndarray) -> np.ndarray:
    """Hermitian inverse with two Hotelling refinement steps.

    Near the end of the barrier path X has eigenvalues ~1/t; plain inv()
    then carries a relative error ~cond*eps which would dominate the dual
    certificate.  Xi <- Xi + Xi(I - X Xi) squares that error away.
    """
    Xi = np.linalg.inv(X)
    I = np.eye(X.shape[0])
    for _ in range(2):
        Xi = Xi + Xi @ (I - X @ Xi)
        Xi = 0.5 * (Xi + Xi.conj().T)
    return Xi


def _refined_solve(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """LU solve with iterative refinement.

    The KKT systems get condition numbers ~t^2 near the end of the barrier
    path; a few refinement passes on the exactly-representable residual
    restore the Newton direction to near working precision.
    """
    try:
        lu, piv = scipy.linalg.lu_factor(M)
        sol = scipy.linalg.lu_solve((lu, piv), rhs)
        for _ in range(3):
            sol = sol + scipy.linalg.lu_solve((lu, piv), rhs - M @ sol)
    except (scipy.linalg.LinAlgError, ValueError):
        sol, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    if not np.all(np.isfinite(sol)):
        sol, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    return sol


def _chol_logdet(mat: np.ndarray):
    """(ok, logdet) without raising; ok=False if not positive definite."""
    try:
        L = np.linalg.cholesky(0.5 * (mat + mat.conj().T))
    except np.linalg.LinAlgError:
        return False, 0.0
    return True, 2.0 * float(np.sum(np.log(np.real(np.diag(L)))))


def _starting_point(problem, names, dims, offs, A, b, start):
    if start is not None:
        xs = []
        for i, name in enumerate(names):
            if name not in start:
                raise InvalidState(f"start is missing block {name!r}")
            M = _as_herm(start[name], dims[i], f"start[{name}]")
            xs.append(hvec(M))
        x0 = np.concatenate(xs) if xs else np.zeros(0)
    else:
        x0, *_ = np.linalg.lstsq(A, b, rcond=None)
    if A.size and np.linalg.norm(A @ x0 - b) > 1e-6 * (1.0 + np.linalg.norm(b)):
        if start is None:
            raise InfeasibleSpec("equality constraints are inconsistent")
        raise SolverFailure("provided start violates the equality constraints",
                            diagnostics={"residual": float(np.linalg.norm(A @ x0 - b))})
    for i, name in enumerate(names):
        ok, _ = _chol_logdet(hunvec(x0[offs[i]:offs[i + 1]], dims[i]))
        if not ok:
            raise SolverFailure(
                f"no strictly feasible start (block {name!r} not positive "
                "definite); pass start=",
                diagnostics={"block": name})
    return x0


def _center(t, x, names, dims, offs, A, b, c, max_inner):
    """Newton-center the barrier objective at weight ``t``.

    Returns (x, invs, y_center, newton_steps).  Raises SolverFailure when the
    decrement cannot be driven below its stagnation thresholds.
    """
    m = A.shape[0]
    y_center = np.zeros(m)
    prev_lam2 = np.inf
    steps = 0
    for _inner in range(max_inner):
        steps += 1
        invs = []
        grad = t * c.copy()
        H = np.zeros((len(x), len(x)))
        for i, d in enumerate(dims):
            X = hunvec(x[offs[i]:offs[i + 1]], d)
            X = 0.5 * (X + X.conj().T)
            Xi = _refined_inverse(X)
            invs.append(Xi)
            grad[offs[i]:offs[i + 1]] -= hvec(Xi)
            B = hermitian_basis_matrix(d)
            K = np.kron(Xi, Xi.conj())
            Hb = np.real(B.conj().T @ K @ B)
            H[offs[i]:offs[i + 1], offs[i]:offs[i + 1]] = 0.5 * (Hb + Hb.T)
        if m:
            KKT = np.block([[H, A.T], [A, np.zeros((m, m))]])
            rhs = np.concatenate([-grad, b - A @ x])
            sol = _refined_solve(KKT, rhs)
            dx, y_center = sol[:len(x)], sol[len(x):]
        else:
            dx = _refined_solve(H, -grad)
        lam2 = float(dx @ (H @ dx))
        if not np.isfinite(lam2):
            raise SolverFailure("Newton step diverged", diagnostics={"t": t})
        if lam2 / 2.0 <= 1e-10:
            return x, invs, y_center, steps
        # at extreme t the KKT solve hits its precision floor; a small,
        # stagnating decrement is an acceptably centered point
        if lam2 / 2.0 <= 1e-6 and lam2 > 0.5 * prev_lam2:
            return x, invs, y_center, steps
        prev_lam2 = lam2

        def merit(xv):
            val = t * float(c @ xv)
            for i, d in enumerate(dims):
                ok, ld = _chol_logdet(hunvec(xv[offs[i]:offs[i + 1]], d))
                if not ok:
                    return None
                val -= ld
            return val

        f0 = merit(x)
        slope = float(grad @ dx)
        beta = 1.0
        while beta > 1e-13:
            f1 = merit(x + beta * dx)
            if f1 is not None and f1 <= f0 + 0.01 * beta * slope + 1e-12 * abs(f0):
                break
            beta *= 0.5
        else:
            if lam2 / 2.0 <= 1e-5:
                return x, invs, y_center, steps
            raise SolverFailure("line search failed",
                                diagnostics={"t": t, "lambda2": lam2})
        x = x + beta * dx
    raise SolverFailure("Newton centering did not converge",
                        diagnostics={"t": t})


def solve_sdp(problem: SdpProblem, *, start: dict | None = None,
              gap_tol: float = GAP_TOL, gap_ceiling: float = 1e-6,
              max_outer: int = 80, max_inner: int = 60) -> SdpSolution:
    """Solve to a certified duality gap of ``gap_tol`` times the value scale.

    ``start`` maps block names to strictly feasible Hermitian PD matrices.
    The barrier path is pushed until the gap target is met; if centering
    breaks down first (the KKT systems carry condition ~t^2, so for some
    geometries double precision runs out a little before 1e-8), the last
    centered point is returned as long as its gap is below ``gap_ceiling``
    times the value scale — the achieved gap is always reported in the
    solution.  Raises :class:`InfeasibleSpec` when the equalities are
    inconsistent and :class:`SolverFailure` when no acceptably centered
    point is ever reached.
    """
    if not problem.blocks:
        raise InvalidState("problem has no blocks")
    names, dims, offs, A, b, c, sgn = _assemble(problem)
    n_total = float(sum(dims))
    x = _starting_point(problem, names, dims, offs, A, b, start)
    m = A.shape[0]
    t = 1.0
    total_newton = 0
    good = None  # (x, invs, y_center, t) at the last centered rung

    for _outer in range(max_outer):
        try:
            x_c, invs, y_center, steps = _center(t, x, names, dims, offs,
                                                 A, b, c, max_inner)
        except SolverFailure:
            if good is None:
                raise
            x, invs, y_center, t = good
            break
        total_newton += steps
        x = x_c
        good = (x, invs, y_center, t)
        scale = max(1.0, abs(float(c @ x)))
        if n_total / t <= gap_tol * scale:
            break
        t = t / MU_REDUCTION
    else:
        x, invs, y_center, t = good

    scale = max(1.0, abs(float(c @ x)))
    if n_total / t > gap_ceiling * scale:
        raise SolverFailure("could not reach an acceptable duality gap",
                            diagnostics={"gap": n_total / t, "t": t})

    # dual recovery at the centered point: y = -nu/t from the KKT multiplier
    # and S_b = X_b^{-1}/t.  At an exactly centered point these satisfy
    # c - A^T y = s, and the identity <c,x> - <b,y> = sum dims / t makes the
    # reported gap equal the barrier bound.
    variables = _split(x, names, dims, offs)
    y = -y_center / t
    slacks = {}
    min_eig_S = np.inf
    for i, name in enumerate(names):
        S = invs[i] / t
        slacks[name] = S
        min_eig_S = min(min_eig_S, _min_eig(S))
    s_vec = np.concatenate([hvec(slacks[n]) for n in names])
    pval = float(c @ x)
    dval = float(b @ y)
    residuals = {
        "primal_eq": float(np.linalg.norm(A @ x - b)) if m else 0.0,
        "min_eig_X": min(_min_eig(variables[n]) for n in names),
        "min_eig_S": float(min_eig_S),
        "complementarity": n_total / t,
        # how well the recovered pair fits c - A^T y = s; limited by the KKT
        # conditioning at the final barrier weight, diagnostic only
        "dual_fit": float(np.linalg.norm(c - (A.T @ y if m else 0.0) - s_vec)),
    }
    return SdpSolution(
        value=sgn * pval,
        dual_value=sgn * dval,
        gap=abs(pval - dval),
        variables=variables,
        dual_slacks=slacks,
        y=y,
        residuals=residuals,
        iterations=total_newton,
    )
