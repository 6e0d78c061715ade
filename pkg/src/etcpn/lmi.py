"""Observer-gain synthesis via LMI feasibility, plus independent verification.

The stability condition for the switched observer is one affine matrix
inequality per allowed mode transition (q -> q'), in per-mode decision
variables ``T_q`` (symmetric), ``G_q`` and ``F_q``:

    [[T_q - G_q - G_q',  G_q' A_q' - C_q' F_q'],
     [      *,                 -T_q'            ]]  < 0,      T_q > 0.

Feasibility is solved by alternating projections between the affine image
of the decision variables and the shifted negative-semidefinite cone;
small dense problems are the target regime, and every accepted solution is
re-certified by eigenvalue decomposition at the returned point.  Gains are
recovered from ``F_q C_q = L_q C_q G_q`` and only accepted after the
recovered gains pass the independent Lyapunov verification.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, GainRecoveryError

_COND_LIMIT = 1e12  # reject solutions whose G_q is numerically singular


def _as_mode_pairs(modes):
    """Normalise mode descriptions to (A, C) pairs."""
    pairs = []
    for m in modes:
        if hasattr(m, "A"):
            pairs.append((np.atleast_2d(m.A), np.atleast_2d(m.C)))
        else:
            A, C = m
            pairs.append((np.atleast_2d(np.asarray(A, float)), np.atleast_2d(np.asarray(C, float))))
    n = pairs[0][0].shape[0]
    r = pairs[0][1].shape[0]
    for A, C in pairs:
        if A.shape != (n, n) or C.shape != (r, n):
            raise DimensionError("mode matrices must share dimensions")
    return pairs, n, r


def complete_graph(n_modes: int):
    """All ordered mode pairs, self-loops included (dwell is certified too)."""
    return [(q, qn) for q in range(1, n_modes + 1) for qn in range(1, n_modes + 1)]


@dataclass
class LmiProblem:
    """Affine feasibility problem over per-mode (T_q, G_q, F_q) variables.

    ``decay`` scales the (1,1) block; 1.0 is the plain stability condition,
    values below 1 additionally certify a per-step contraction factor of
    ``decay`` in the mode-dependent quadratic metric.
    """

    modes: list
    edges: list
    eps: float = 1e-6
    decay: float = 1.0
    n: int = field(init=False)
    r: int = field(init=False)

    def __post_init__(self):
        self.modes, self.n, self.r = _as_mode_pairs(self.modes)
        if not self.edges:
            raise DimensionError("transition graph must contain at least one edge")
        for q, qn in self.edges:
            if not (1 <= q <= len(self.modes) and 1 <= qn <= len(self.modes)):
                raise DimensionError(f"edge ({q}, {qn}) references an unknown mode")

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @property
    def dim(self) -> int:
        n, r = self.n, self.r
        return self.n_modes * (n * (n + 1) // 2 + n * n + n * r)

    # -- variable packing ------------------------------------------------

    def unpack(self, theta):
        n, r, Q = self.n, self.r, self.n_modes
        t_len = n * (n + 1) // 2
        per_mode = t_len + n * n + n * r
        T, G, F = [], [], []
        for q in range(Q):
            chunk = theta[q * per_mode : (q + 1) * per_mode]
            Tq = np.zeros((n, n))
            idx = 0
            for i in range(n):
                for j in range(i, n):
                    Tq[i, j] = Tq[j, i] = chunk[idx]
                    idx += 1
            Gq = chunk[idx : idx + n * n].reshape(n, n)
            Fq = chunk[idx + n * n :].reshape(n, r)
            T.append(Tq)
            G.append(Gq)
            F.append(Fq)
        return T, G, F

    def pack(self, T, G, F):
        parts = []
        for q in range(self.n_modes):
            tq = [T[q][i, j] for i in range(self.n) for j in range(i, self.n)]
            parts.append(np.concatenate([tq, G[q].ravel(), F[q].ravel()]))
        return np.concatenate(parts)

    # -- constraint blocks -----------------------------------------------

    def edge_block(self, q: int, qn: int, T, G, F) -> np.ndarray:
        A, C = self.modes[q - 1]
        Tq, Gq, Fq = T[q - 1], G[q - 1], F[q - 1]
        Tn = T[qn - 1]
        off = Gq.T @ A.T - C.T @ Fq.T
        top = self.decay**2 * (Tq - Gq - Gq.T)
        return np.block([[top, off], [off.T, -Tn]])

    def blocks(self, T, G, F):
        """All constraint blocks: one per edge, then one positivity block per mode."""
        out = [self.edge_block(q, qn, T, G, F) for q, qn in self.edges]
        out.extend(-T[q] for q in range(self.n_modes))
        return out

    def blocks_from_theta(self, theta):
        return self.blocks(*self.unpack(theta))

    def initial_theta(self):
        eye = [np.eye(self.n) for _ in range(self.n_modes)]
        zeros = [np.zeros((self.n, self.r)) for _ in range(self.n_modes)]
        return self.pack(eye, eye, zeros)


def assemble(modes, transition_graph=None, eps: float = 1e-6, decay: float = 1.0) -> LmiProblem:
    """Build the per-edge block constraints for a mode set.

    ``transition_graph`` defaults to the complete graph with self-loops,
    i.e. arbitrary switching including dwell.
    """
    pairs, _, _ = _as_mode_pairs(modes)
    edges = transition_graph if transition_graph is not None else complete_graph(len(pairs))
    return LmiProblem(modes=modes, edges=list(edges), eps=eps, decay=decay)


@dataclass
class LmiSolution:
    T: list
    G: list
    F: list
    margin: float
    iterations: int

    @property
    def feasible(self) -> bool:
        return True


@dataclass
class LmiInfeasible:
    best_margin: float
    iterations: int
    message: str = "no feasible point found"

    @property
    def feasible(self) -> bool:
        return False


def _project_cone(w, V, shift):
    """Project a symmetric matrix (given its eigh) onto {X : X <= -shift I}."""
    return (V * np.minimum(w, -shift)) @ V.T


def _pocs(eval_blocks, dim, theta0, eps, max_iter, seed, shift=None, restarts=2):
    """Alternating projections between an affine image and the shifted PSD cone.

    ``eval_blocks`` maps a parameter vector to the list of symmetric
    constraint blocks; the affine structure is probed numerically once.
    Returns (theta, margin, iterations, success); the margin is always
    computed from a fresh block evaluation, never from solver state.
    """
    base = eval_blocks(np.zeros(dim))
    sizes = [b.shape[0] for b in base]
    total = sum(s * s for s in sizes)
    b_vec = np.concatenate([b.ravel() for b in base])
    A_mat = np.zeros((total, dim))
    for j in range(dim):
        e = np.zeros(dim)
        e[j] = 1.0
        cols = np.concatenate([blk.ravel() for blk in eval_blocks(e)])
        A_mat[:, j] = cols - b_vec
    pinv_A = np.linalg.pinv(A_mat)

    if shift is None:
        shift = max(100 * eps, 1e-2)
    rng = np.random.default_rng(seed)
    theta = np.asarray(theta0, dtype=float).copy()
    best_margin, best_theta = -np.inf, theta.copy()
    it = 0
    stall_window, stall_tol = 500, 1e-12
    last_best, last_check = -np.inf, 0
    attempt = 0

    while it < max_iter:
        it += 1
        flat = A_mat @ theta + b_vec
        margin = np.inf
        proj = np.empty_like(flat)
        pos = 0
        for s in sizes:
            block = flat[pos : pos + s * s].reshape(s, s)
            block = 0.5 * (block + block.T)
            w, V = np.linalg.eigh(block)
            margin = min(margin, -w[-1])
            proj[pos : pos + s * s] = _project_cone(w, V, shift).ravel()
            pos += s * s
        if margin > best_margin:
            best_margin, best_theta = margin, theta.copy()
        if margin >= eps:
            return theta, margin, it, True
        if it - last_check >= stall_window:
            if best_margin - last_best < stall_tol:
                attempt += 1
                if attempt > restarts:
                    break
                theta = np.asarray(theta0, dtype=float) + 0.5 * rng.standard_normal(dim)
                last_best, last_check = -np.inf, it
                continue
            last_best, last_check = best_margin, it
        theta = pinv_A @ (proj - b_vec)

    return best_theta, best_margin, it, False


def solve_feasibility(
    problem: LmiProblem,
    eps: float | None = None,
    max_iter: int = 50_000,
    seed: int = 0,
):
    """Find a strictly feasible point or report the best margin reached.

    A returned :class:`LmiSolution` has been re-validated by assembling and
    eigen-decomposing every constraint at the solution point; the achieved
    margin is the negated most-positive eigenvalue across constraints.
    """
    eps = problem.eps if eps is None else eps
    theta, _, iterations, success = _pocs(
        problem.blocks_from_theta,
        problem.dim,
        problem.initial_theta(),
        eps,
        max_iter,
        seed,
    )
    T, G, F = problem.unpack(theta)
    margin = min(-np.linalg.eigvalsh(blk)[-1] for blk in problem.blocks(T, G, F))
    if not success or margin < eps:
        return LmiInfeasible(best_margin=margin, iterations=iterations)
    if any(np.linalg.cond(Gq) > _COND_LIMIT for Gq in G):
        return LmiInfeasible(
            best_margin=margin,
            iterations=iterations,
            message="feasible point rejected: G_q numerically singular",
        )
    return LmiSolution(T=T, G=G, F=F, margin=margin, iterations=iterations)


def recover_gain(Fq, Gq, Cq) -> np.ndarray:
    """Observer gain from the LMI variables.

    For square output maps the stated inverse formula applies; otherwise
    ``L (C G) = F C`` is solved in least squares.  Callers must still pass
    the recovered gain through :func:`verify_gains`; recovery alone carries
    no stability certificate.
    """
    Fq = np.atleast_2d(np.asarray(Fq, float))
    Gq = np.atleast_2d(np.asarray(Gq, float))
    Cq = np.atleast_2d(np.asarray(Cq, float))
    n = Gq.shape[0]
    r = Cq.shape[0]
    cg = Cq @ Gq
    if np.linalg.matrix_rank(cg, tol=1e-10) < r:
        resid = float(np.linalg.norm(Fq @ Cq))
        raise GainRecoveryError(
            f"C G is rank deficient (rank < {r}); residual {resid:.3e}", residual=resid
        )
    if r == n:
        return Fq @ Cq @ np.linalg.inv(Cq @ Gq.T)
    L = (Fq @ Cq) @ np.linalg.pinv(cg)
    return L


@dataclass
class VerificationReport:
    """Independent Lyapunov check of a gain set.

    ``edge_margins[(q, q')]`` is the largest eigenvalue of
    ``(A_q - L_q C_q)' P_q' (A_q - L_q C_q) - P_q``; all must sit below
    ``-eps_verify`` for a pass.
    """

    edge_margins: dict
    spectral_radii: list
    passed: bool
    P: list | None
    eps_verify: float

    @property
    def worst(self) -> float:
        return max(self.edge_margins.values())


def verify_gains(
    modes,
    gains,
    transition_graph=None,
    eps_verify: float = 1e-8,
    P=None,
    max_iter: int = 50_000,
    seed: int = 0,
) -> VerificationReport:
    """Check a gain set against the pre-relaxation Lyapunov inequalities.

    When no Lyapunov matrices are supplied, their feasibility problem
    (affine in the P_q for fixed gains) is solved first; failure yields a
    failing report, never an exception.
    """
    pairs, n, r = _as_mode_pairs(modes)
    L_list = gains.L if hasattr(gains, "L") else [np.atleast_2d(np.asarray(l, float)) for l in gains]
    if len(L_list) != len(pairs):
        raise DimensionError("one gain per mode required")
    closed = [A - L_list[i] @ C for i, (A, C) in enumerate(pairs)]
    edges = transition_graph if transition_graph is not None else complete_graph(len(pairs))

    if P is None:
        t_len = n * (n + 1) // 2

        def unpack_p(theta):
            out = []
            for q in range(len(pairs)):
                Pq = np.zeros((n, n))
                idx = 0
                chunk = theta[q * t_len : (q + 1) * t_len]
                for i in range(n):
                    for j in range(i, n):
                        Pq[i, j] = Pq[j, i] = chunk[idx]
                        idx += 1
                out.append(Pq)
            return out

        def eval_blocks(theta):
            Ps = unpack_p(theta)
            blocks = [
                closed[q - 1].T @ Ps[qn - 1] @ closed[q - 1] - Ps[q - 1]
                for q, qn in edges
            ]
            blocks.extend(-Pq for Pq in Ps)
            return blocks

        theta0 = np.concatenate(
            [np.eye(n)[np.triu_indices(n)] for _ in range(len(pairs))]
        )
        theta, _, _, success = _pocs(
            eval_blocks, t_len * len(pairs), theta0, eps_verify, max_iter, seed
        )
        P_list = unpack_p(theta)
    else:
        P_list = [np.atleast_2d(np.asarray(p, float)) for p in P]

    edge_margins = {}
    for q, qn in edges:
        M = closed[q - 1].T @ P_list[qn - 1] @ closed[q - 1] - P_list[q - 1]
        edge_margins[(q, qn)] = float(np.linalg.eigvalsh(M)[-1])
    pos_ok = all(np.linalg.eigvalsh(Pq)[0] > 0 for Pq in P_list)
    passed = pos_ok and all(v <= -eps_verify for v in edge_margins.values())
    radii = [float(np.max(np.abs(np.linalg.eigvals(Ab)))) for Ab in closed]
    return VerificationReport(
        edge_margins=edge_margins,
        spectral_radii=radii,
        passed=passed,
        P=P_list if pos_ok else None,
        eps_verify=eps_verify,
    )


def synthesize_gains(
    model,
    eps: float = 1e-6,
    max_iter: int = 50_000,
    seed: int = 0,
    decays=(0.45, 0.55, 0.7, 0.85, 0.999),
):
    """Full synthesis pipeline: assemble, solve, recover, verify.

    Tries progressively weaker contraction targets and returns the first
    gain set that the independent verifier certifies, together with the
    solver output and the verification report.  Returns
    ``(None, last_solver_output, None)`` when every attempt fails.
    """
    modes = model.modes if hasattr(model, "modes") else model
    last = None
    for decay in decays:
        problem = assemble(modes, eps=eps, decay=decay)
        sol = solve_feasibility(problem, eps=eps, max_iter=max_iter, seed=seed)
        last = sol
        if not sol.feasible:
            continue
        try:
            L = [
                recover_gain(sol.F[q], sol.G[q], problem.modes[q][1])
                for q in range(problem.n_modes)
            ]
        except GainRecoveryError:
            continue
        report = verify_gains(modes, L, eps_verify=1e-8, seed=seed)
        if report.passed:
            from .observer import ObserverGains

            return ObserverGains(L=L, P=report.P), sol, report
    return None, last, None
