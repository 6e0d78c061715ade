"""Hybrid observer: marking/firing estimation plus a switched Luenberger observer.

The discrete-event side estimates the mode marking and transition firings
from the measured event vector; the continuous side runs the mode-dependent
Luenberger correction.  Event residuals compare the observed event vector
against the one the observer predicts from its own state estimate, so a
suppressed or spurious mode switch shows up even while the state tracking
stays tight.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ModeAmbiguityError
from .net import HybridModel, active_mode
from .simulate import Trajectory


@dataclass
class ObserverGains:
    """Per-mode observer gains, optionally with certifying Lyapunov matrices."""

    L: list
    P: list | None = None

    def __post_init__(self):
        self.L = [np.atleast_2d(np.asarray(l, dtype=float)) for l in self.L]
        if self.P is not None:
            self.P = [np.atleast_2d(np.asarray(p, dtype=float)) for p in self.P]

    def gain(self, q: int) -> np.ndarray:
        return self.L[q - 1]


def continuous_observer_step(model: HybridModel, xhat, u, y, qhat: int, gains: ObserverGains):
    """One Luenberger update under the estimated mode.

    ``xhat' = A xhat + B u + L (y - C xhat)`` with all matrices taken from
    mode ``qhat``.
    """
    m = model.mode(qhat)
    L = gains.gain(qhat)
    xhat = np.asarray(xhat, dtype=float).ravel()
    u = np.atleast_1d(np.asarray(u, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    innovation = y - m.C @ xhat
    return m.A @ xhat + m.B @ u + L @ innovation


def observer_incidence(model: HybridModel, mode: int, gains: ObserverGains) -> np.ndarray:
    """Incidence block of the observer's own net representation.

    The observer is itself a linear recurrence in ``xhat`` driven by the
    augmented input ``[u; y]``, so its net has ``p + r`` input places and
    ``n`` state places and the block is
    ``[[I, 0], [[B L], A - L C]] - I``.
    """
    m = model.mode(mode)
    L = gains.gain(mode)
    p, r, n = model.p, model.r, model.n
    f = p + r + n
    post = np.zeros((f, f))
    post[: p + r, : p + r] = np.eye(p + r)
    post[p + r :, :p] = m.B
    post[p + r :, p : p + r] = L
    post[p + r :, p + r :] = m.A - L @ m.C
    return post - np.eye(f)


@dataclass
class DiscreteObserverSpec:
    """Descriptor-form data for the discrete-event observer.

    The stacked vector ``[marking; firing]`` satisfies the token-conservation
    descriptor pair ``E = [I | W_d]``, ``A = [I | 0]``; ``H`` selects the
    measured components.  With everything measured the observer matrices
    ``F, G, R, N`` reduce the estimator to a pass-through of the
    measurements (``F = 0`` convention); with hidden places or transitions
    the estimate is reconstructed from the conservation constraint by least
    squares.
    """

    wd: np.ndarray
    measured_places: np.ndarray
    measured_transitions: np.ndarray
    E: np.ndarray = field(init=False)
    A: np.ndarray = field(init=False)
    H: np.ndarray = field(init=False)
    F: np.ndarray = field(init=False)
    G: np.ndarray = field(init=False)
    R: np.ndarray = field(init=False)
    N: np.ndarray = field(init=False)

    def __post_init__(self):
        self.wd = np.asarray(self.wd, dtype=np.int64)
        n_p, n_t = self.wd.shape
        self.measured_places = np.asarray(self.measured_places, dtype=int)
        self.measured_transitions = np.asarray(self.measured_transitions, dtype=int)
        self.E = np.hstack([np.eye(n_p), self.wd.astype(float)])
        self.A = np.hstack([np.eye(n_p), np.zeros((n_p, n_t))])
        rows = []
        for i in self.measured_places:
            e = np.zeros(n_p + n_t)
            e[i] = 1.0
            rows.append(e)
        for j in self.measured_transitions:
            e = np.zeros(n_p + n_t)
            e[n_p + j] = 1.0
            rows.append(e)
        self.H = np.array(rows) if rows else np.zeros((0, n_p + n_t))
        n_mo = len(self.measured_places)
        m_o = len(self.measured_transitions)
        self.F = np.zeros((n_p, n_p))
        self.G = np.zeros((n_p, n_mo + m_o))
        for row, i in enumerate(self.measured_places):
            self.G[i, row] = 1.0
        self.R = np.vstack([np.eye(n_p), np.zeros((n_t, n_p))])
        self.N = np.zeros((n_p + n_t, n_mo + m_o))
        for row, j in enumerate(self.measured_transitions):
            self.N[n_p + j, n_mo + row] = 1.0

    @classmethod
    def fully_measured(cls, model: HybridModel) -> "DiscreteObserverSpec":
        blocks = model.incidence_blocks()
        n_p, n_t = blocks.wd.shape
        return cls(blocks.wd, np.arange(n_p), np.arange(n_t))

    @property
    def is_fully_measured(self) -> bool:
        n_p, n_t = self.wd.shape
        return (
            len(self.measured_places) == n_p and len(self.measured_transitions) == n_t
        )

    def estimate(self, marking_obs, sigma_obs, prev_marking):
        """Estimate the full (marking, firing) pair from measured components.

        ``marking_obs``/``sigma_obs`` carry values only at measured indices;
        unmeasured entries are reconstructed from
        ``M(k) = M(k-1) + W_d sigma(k)`` in least squares, rounded to the
        nearest nonnegative integers.
        """
        n_p, n_t = self.wd.shape
        marking_obs = np.asarray(marking_obs)
        sigma_obs = np.asarray(sigma_obs)
        if self.is_fully_measured:
            return marking_obs.astype(np.int64), sigma_obs.astype(np.int64)

        hidden_p = np.setdiff1d(np.arange(n_p), self.measured_places)
        hidden_t = np.setdiff1d(np.arange(n_t), self.measured_transitions)
        m_full = np.zeros(n_p)
        m_full[self.measured_places] = marking_obs[self.measured_places]
        s_full = np.zeros(n_t)
        s_full[self.measured_transitions] = sigma_obs[self.measured_transitions]

        n_unknown = len(hidden_p) + len(hidden_t)
        A_ls = np.zeros((n_p, n_unknown))
        for col, i in enumerate(hidden_p):
            A_ls[i, col] = 1.0
        for col, j in enumerate(hidden_t):
            A_ls[:, len(hidden_p) + col] = -self.wd[:, j]
        b = np.asarray(prev_marking, dtype=float) + self.wd @ s_full - m_full
        # b already accounts for measured parts; solve for the hidden ones
        sol, *_ = np.linalg.lstsq(A_ls, b, rcond=None)
        sol = np.maximum(np.round(sol), 0).astype(np.int64)
        m_full[hidden_p] = sol[: len(hidden_p)]
        s_full[hidden_t] = sol[len(hidden_p) :]
        return m_full.astype(np.int64), s_full.astype(np.int64)


def predicted_firing(model: HybridModel, marking_est, xhat) -> np.ndarray:
    """Firing vector the observer expects from its own state estimate."""
    sigma = np.zeros(len(model.guards), dtype=np.int64)
    enabled = [
        j
        for j, g in enumerate(model.guards)
        if marking_est[g.from_mode - 1] >= 1 and g.holds(xhat)
    ]
    if enabled:
        sigma[enabled[0]] = 1
    return sigma


@dataclass
class ResidualTrace:
    """Time-indexed residuals of the hybrid observer.

    ``r_psi[k]`` stacks the marking and firing residuals (observed minus
    predicted event vector); :meth:`psi_indicator` collapses it to the
    per-step mismatch count used as a detection feature.
    """

    r_x: np.ndarray
    r_y: np.ndarray
    r_psi: np.ndarray
    mode_est: np.ndarray
    x_hat: np.ndarray
    y_hat: np.ndarray

    def __len__(self) -> int:
        return len(self.mode_est)

    def psi_indicator(self) -> np.ndarray:
        return np.abs(self.r_psi).sum(axis=1).astype(float)

    def features(self, include_psi: bool = True) -> np.ndarray:
        cols = [self.r_x, self.r_y]
        if include_psi:
            cols.append(self.psi_indicator().reshape(-1, 1))
        return np.hstack(cols)


def generate_residuals(
    trajectory: Trajectory,
    gains: ObserverGains,
    obs_spec: DiscreteObserverSpec | None,
    model: HybridModel,
    xhat0=None,
) -> ResidualTrace:
    """Run both observers in lockstep over a recorded trajectory.

    The marking estimate feeds the continuous observer's mode; the state
    estimate feeds the guard-based event prediction.  Residuals are
    observed-minus-estimated throughout.
    """
    if obs_spec is None:
        obs_spec = DiscreteObserverSpec.fully_measured(model)
    H = len(trajectory)
    n, r, m = model.n, model.r, len(model.guards)
    Q = model.n_modes
    r_x = np.zeros((H, n))
    r_y = np.zeros((H, r))
    r_psi = np.zeros((H, Q + m), dtype=np.int64)
    mode_est = np.zeros(H, dtype=int)
    x_hat_log = np.zeros((H, n))
    y_hat_log = np.zeros((H, r))

    xhat = np.zeros(n) if xhat0 is None else np.asarray(xhat0, dtype=float).ravel()
    prev_marking = model.net().initial_marking.discrete.copy()
    qhat_prev = model.initial_mode

    for k in range(H):
        marking_obs, sigma_obs = trajectory.psi(k)
        mhat, sigma_hat = obs_spec.estimate(marking_obs, sigma_obs, prev_marking)
        try:
            qhat = active_mode(mhat)
        except ModeAmbiguityError:
            # fall back to the switching logic applied to the state estimate
            fired = [
                g
                for g in model.guards
                if g.from_mode == qhat_prev and g.holds(xhat)
            ]
            qhat = fired[0].to_mode if fired else qhat_prev

        sigma_pred = predicted_firing(model, prev_marking, xhat)
        marking_pred = prev_marking + (
            model.incidence_blocks().wd @ sigma_pred if m else np.zeros(Q, dtype=np.int64)
        )
        r_psi[k, :Q] = mhat - marking_pred
        r_psi[k, Q:] = sigma_hat - sigma_pred

        mq = model.mode(qhat)
        yhat = mq.C @ xhat
        r_x[k] = trajectory.x[k] - xhat
        r_y[k] = trajectory.y[k] - yhat
        mode_est[k] = qhat
        x_hat_log[k] = xhat
        y_hat_log[k] = yhat

        xhat = continuous_observer_step(model, xhat, trajectory.u[k], trajectory.y[k], qhat, gains)
        prev_marking = mhat
        qhat_prev = qhat

    return ResidualTrace(r_x, r_y, r_psi, mode_est, x_hat_log, y_hat_log)
