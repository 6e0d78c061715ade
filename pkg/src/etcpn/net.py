"""Hybrid Petri-net core: structure, incidence construction and marking evolution.

A switched discrete-time LTI system is represented as a hybrid timed Petri
net with two interacting layers:

* a discrete layer whose places encode the operational modes and whose
  transitions, guarded by state conditions, move the single mode token;
* a continuous layer whose places hold the input and state signals and
  whose transitions realise one step of the active mode's recurrence
  ``x(k+1) = A_q x(k) + B_q u(k)``.

Mode gating is encoded structurally with test arcs (reciprocal arc pairs of
equal weight between a mode place and the continuous transitions of that
mode), so the cross blocks of the incidence matrix vanish while the
pre/post matrices still carry the coupling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import (
    DimensionError,
    EnablingViolationError,
    GuardConflictError,
    MarkingUnderflowError,
    ModeAmbiguityError,
    StructuralCouplingError,
)


class NodeKind(Enum):
    DISCRETE = "discrete"
    CONTINUOUS = "continuous"


_COMPARATORS = {
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
}

COMPARATOR_SYMBOLS = tuple(_COMPARATORS)


@dataclass(frozen=True)
class GuardPredicate:
    """State condition triggering a mode switch.

    ``component`` is a 0-based index into the state vector; the switch from
    ``from_mode`` to ``to_mode`` (1-based mode ids) is taken when the
    comparison holds and the source mode is marked.  Comparator strictness
    is honoured exactly, so complementary guards partition the state space.
    """

    component: int
    comparator: str
    threshold: float
    from_mode: int
    to_mode: int

    def __post_init__(self):
        if self.comparator not in _COMPARATORS:
            raise DimensionError(f"unknown comparator {self.comparator!r}")

    def holds(self, x) -> bool:
        return bool(_COMPARATORS[self.comparator](x[self.component], self.threshold))

    def required_marking(self, n_modes: int) -> np.ndarray:
        m = np.zeros(n_modes, dtype=np.int64)
        m[self.from_mode - 1] = 1
        return m


@dataclass
class ModeLti:
    """One mode's LTI data: dynamics, output map and fault distributions."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    Fx: np.ndarray
    Fy: np.ndarray

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.B = np.atleast_2d(np.asarray(self.B, dtype=float))
        self.C = np.atleast_2d(np.asarray(self.C, dtype=float))
        self.Fx = np.atleast_2d(np.asarray(self.Fx, dtype=float))
        self.Fy = np.atleast_2d(np.asarray(self.Fy, dtype=float))
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise DimensionError(f"A must be square, got {self.A.shape}")
        if self.B.shape[0] != n:
            raise DimensionError(f"B has {self.B.shape[0]} rows, expected {n}")
        if self.C.shape[1] != n:
            raise DimensionError(f"C has {self.C.shape[1]} columns, expected {n}")
        if self.Fx.shape[0] != n:
            raise DimensionError(f"Fx has {self.Fx.shape[0]} rows, expected {n}")
        if self.Fy.shape[0] != self.C.shape[0]:
            raise DimensionError(
                f"Fy has {self.Fy.shape[0]} rows, expected {self.C.shape[0]}"
            )
        if self.Fx.shape[1] != self.Fy.shape[1]:
            raise DimensionError("Fx and Fy must share the fault dimension")


@dataclass
class Marking:
    """Joint marking at step ``k``: integer tokens plus real-valued levels."""

    discrete: np.ndarray
    continuous: np.ndarray
    step: int = 0

    def __post_init__(self):
        self.discrete = np.asarray(self.discrete, dtype=np.int64)
        self.continuous = np.asarray(self.continuous, dtype=float)
        if np.any(self.discrete < 0):
            raise MarkingUnderflowError("discrete marking entries must be >= 0")

    def mode(self) -> int:
        """Active mode id (1-based) for a one-hot mode marking."""
        return active_mode(self.discrete)

    def copy(self) -> "Marking":
        return Marking(self.discrete.copy(), self.continuous.copy(), self.step)


def active_mode(md) -> int:
    md = np.asarray(md)
    hot = np.flatnonzero(md == 1)
    if len(hot) != 1 or md.sum() != 1:
        raise ModeAmbiguityError(f"marking {md.tolist()} does not encode one mode")
    return int(hot[0]) + 1


@dataclass
class HybridModel:
    """Switched LTI model with guard-driven, state-dependent mode selection."""

    modes: list
    guards: list
    initial_state: np.ndarray
    initial_mode: int = 1
    name: str = ""

    def __post_init__(self):
        if not self.modes:
            raise DimensionError("a hybrid model needs at least one mode")
        self.initial_state = np.asarray(self.initial_state, dtype=float).ravel()
        m0 = self.modes[0]
        for i, m in enumerate(self.modes):
            if (
                m.A.shape != m0.A.shape
                or m.B.shape != m0.B.shape
                or m.C.shape != m0.C.shape
                or m.Fx.shape != m0.Fx.shape
                or m.Fy.shape != m0.Fy.shape
            ):
                raise DimensionError(f"mode {i + 1} dimensions differ from mode 1")
        if self.initial_state.shape != (self.n,):
            raise DimensionError(
                f"initial state has length {len(self.initial_state)}, expected {self.n}"
            )
        if not 1 <= self.initial_mode <= self.n_modes:
            raise DimensionError(f"initial mode {self.initial_mode} out of range")
        for g in self.guards:
            if not (1 <= g.from_mode <= self.n_modes and 1 <= g.to_mode <= self.n_modes):
                raise DimensionError("guard references an unknown mode")
            if not 0 <= g.component < self.n:
                raise DimensionError("guard references an unknown state component")
        self._net = None
        self._blocks = None

    @property
    def n(self) -> int:
        return self.modes[0].A.shape[0]

    @property
    def p(self) -> int:
        return self.modes[0].B.shape[1]

    @property
    def r(self) -> int:
        return self.modes[0].C.shape[0]

    @property
    def m_f(self) -> int:
        return self.modes[0].Fx.shape[1]

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    def mode(self, q: int) -> ModeLti:
        return self.modes[q - 1]

    def net(self) -> "NetStructure":
        if self._net is None:
            self._net = build_net(self)
        return self._net

    def incidence_blocks(self) -> "IncidenceBlocks":
        if self._blocks is None:
            self._blocks = incidence(self.net())
        return self._blocks

    def guards_from(self, q: int):
        return [g for g in self.guards if g.from_mode == q]


@dataclass
class IncidenceBlocks:
    """Incidence matrix split into the discrete block and per-mode continuous blocks."""

    wd: np.ndarray
    wc: list

    @property
    def f(self) -> int:
        return self.wc[0].shape[0]


@dataclass
class NetStructure:
    """Net quadruple data: typed nodes, pre/post matrices, timing and initial marking.

    ``mode_partition`` maps each mode (1-based) to the column indices of its
    continuous transitions; it is filled in by :func:`build_net` and enables
    the per-mode split performed by :func:`incidence`.
    """

    places: list
    transitions: list
    pre: np.ndarray
    post: np.ndarray
    timing: dict
    initial_marking: Marking
    mode_partition: dict = field(default_factory=dict)

    def __post_init__(self):
        self.pre = np.asarray(self.pre, dtype=float)
        self.post = np.asarray(self.post, dtype=float)
        np_, nt = len(self.places), len(self.transitions)
        if self.pre.shape != (np_, nt) or self.post.shape != (np_, nt):
            raise DimensionError(
                f"pre/post must be {np_}x{nt}, got {self.pre.shape} and {self.post.shape}"
            )
        # post entries on continuous rows are signed flow coefficients (the
        # state matrices land there), so nonnegativity only binds elsewhere
        d_p = self.discrete_place_indices
        d_t = self.discrete_transition_indices
        if np.any(self.pre < 0):
            raise DimensionError("pre arc weights must be nonnegative")
        if d_p.size and np.any(self.post[d_p, :] < 0):
            raise DimensionError("post arc weights on discrete places must be nonnegative")
        for m in (self.pre, self.post):
            sub = m[np.ix_(d_p, d_t)]
            if not np.array_equal(sub, np.round(sub)):
                raise DimensionError("discrete arc weights must be integers")
        # test-arc discipline: any arc between a discrete place and a
        # continuous transition must appear identically in pre and post
        c_t = self.continuous_transition_indices
        if d_p.size and c_t.size:
            if not np.array_equal(
                self.pre[np.ix_(d_p, c_t)], self.post[np.ix_(d_p, c_t)]
            ):
                raise StructuralCouplingError(
                    "discrete-place/continuous-transition arcs must be reciprocal pairs"
                )

    @property
    def discrete_place_indices(self) -> np.ndarray:
        return np.array(
            [i for i, (_, k) in enumerate(self.places) if k is NodeKind.DISCRETE],
            dtype=int,
        )

    @property
    def continuous_place_indices(self) -> np.ndarray:
        return np.array(
            [i for i, (_, k) in enumerate(self.places) if k is NodeKind.CONTINUOUS],
            dtype=int,
        )

    @property
    def discrete_transition_indices(self) -> np.ndarray:
        return np.array(
            [j for j, (_, k) in enumerate(self.transitions) if k is NodeKind.DISCRETE],
            dtype=int,
        )

    @property
    def continuous_transition_indices(self) -> np.ndarray:
        return np.array(
            [j for j, (_, k) in enumerate(self.transitions) if k is NodeKind.CONTINUOUS],
            dtype=int,
        )

    def pre_discrete(self) -> np.ndarray:
        sub = self.pre[np.ix_(self.discrete_place_indices, self.discrete_transition_indices)]
        return sub.astype(np.int64)

    def post_discrete(self) -> np.ndarray:
        sub = self.post[np.ix_(self.discrete_place_indices, self.discrete_transition_indices)]
        return sub.astype(np.int64)


def build_wc(A, B) -> np.ndarray:
    """Continuous incidence block of the net realising ``x' = A x + B u``.

    The continuous places carry ``[u; x]`` (dimension ``f = p + n``); with a
    one-input-place-per-transition layout the pre matrix is the identity and
    the post matrix stacks the system matrices, so the incidence block is
    ``[[I, 0], [B, A]] - I``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    n = A.shape[0]
    if A.shape != (n, n) or B.shape[0] != n:
        raise DimensionError(f"incompatible shapes A{A.shape}, B{B.shape}")
    p = B.shape[1]
    f = p + n
    post = np.zeros((f, f))
    post[:p, :p] = np.eye(p)
    post[p:, :p] = B
    post[p:, p:] = A
    return post - np.eye(f)


def build_wc_with_output(A, B, C) -> np.ndarray:
    """Continuous incidence block with output places appended (``f = p + n + r``).

    The output rows replicate ``y' = C x' = C B u + C A x``, so the bottom
    block row is ``[C B, C A, 0]`` before subtracting the identity.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    n = A.shape[0]
    if A.shape != (n, n) or B.shape[0] != n or C.shape[1] != n:
        raise DimensionError(f"incompatible shapes A{A.shape}, B{B.shape}, C{C.shape}")
    p, r = B.shape[1], C.shape[0]
    f = p + n + r
    post = np.zeros((f, f))
    post[:p, :p] = np.eye(p)
    post[p : p + n, :p] = B
    post[p : p + n, p : p + n] = A
    post[p + n :, :p] = C @ B
    post[p + n :, p : p + n] = C @ A
    return post - np.eye(f)


def build_net(model: HybridModel) -> NetStructure:
    """Construct the hybrid net of a switched model (input and state places only).

    Places are ordered mode places first, then ``u`` places, then ``x``
    places.  Each mode owns a full copy of the ``f`` continuous transitions,
    gated by a test arc from its mode place, so the assembled pre/post
    matrices are plain ``|P| x |T|`` arrays.
    """
    Q, p, n = model.n_modes, model.p, model.n
    f = p + n
    places = [(f"q{q}", NodeKind.DISCRETE) for q in range(1, Q + 1)]
    places += [(f"u{i}", NodeKind.CONTINUOUS) for i in range(1, p + 1)]
    places += [(f"x{i}", NodeKind.CONTINUOUS) for i in range(1, n + 1)]
    place_names = [name for name, _ in places]

    transitions = [
        (f"t{g.from_mode}->{g.to_mode}", NodeKind.DISCRETE) for g in model.guards
    ]
    m = len(transitions)
    mode_partition = {}
    for q in range(1, Q + 1):
        cols = []
        for j in range(f):
            cols.append(m + (q - 1) * f + j)
            transitions.append((f"v{q}.{place_names[Q + j]}", NodeKind.CONTINUOUS))
        mode_partition[q] = np.array(cols, dtype=int)

    n_p, n_t = len(places), len(transitions)
    pre = np.zeros((n_p, n_t))
    post = np.zeros((n_p, n_t))

    for j, g in enumerate(model.guards):
        pre[g.from_mode - 1, j] = 1.0
        post[g.to_mode - 1, j] = 1.0

    for q in range(1, Q + 1):
        cols = mode_partition[q]
        # test arc from the mode place (identical weight in pre and post)
        pre[q - 1, cols] = 1.0
        post[q - 1, cols] = 1.0
        pre[Q : Q + f, cols] = np.eye(f)
        mq = model.mode(q)
        post_c = np.zeros((f, f))
        post_c[:p, :p] = np.eye(p)
        post_c[p:, :p] = mq.B
        post_c[p:, p:] = mq.A
        post[Q : Q + f, cols] = post_c

    timing = {name: 0.0 for name, kind in transitions if kind is NodeKind.DISCRETE}
    timing.update(
        {name: np.inf for name, kind in transitions if kind is NodeKind.CONTINUOUS}
    )

    md0 = np.zeros(Q, dtype=np.int64)
    md0[model.initial_mode - 1] = 1
    mc0 = np.concatenate([np.zeros(p), model.initial_state])
    marking0 = Marking(md0, mc0, 0)
    return NetStructure(places, transitions, pre, post, timing, marking0, mode_partition)


def incidence(net: NetStructure) -> IncidenceBlocks:
    """Incidence matrix ``post - pre`` split into discrete and per-mode blocks.

    Raises :class:`StructuralCouplingError` when a cross block between the
    discrete and continuous layers is nonzero.
    """
    w = net.post - net.pre
    d_p, c_p = net.discrete_place_indices, net.continuous_place_indices
    d_t, c_t = net.discrete_transition_indices, net.continuous_transition_indices
    if d_p.size and c_t.size and np.any(w[np.ix_(d_p, c_t)] != 0):
        raise StructuralCouplingError("nonzero discrete-place/continuous-transition block")
    if c_p.size and d_t.size and np.any(w[np.ix_(c_p, d_t)] != 0):
        raise StructuralCouplingError("nonzero continuous-place/discrete-transition block")
    wd = w[np.ix_(d_p, d_t)].astype(np.int64) if d_p.size and d_t.size else np.zeros(
        (d_p.size, d_t.size), dtype=np.int64
    )
    if net.mode_partition:
        wc = [w[np.ix_(c_p, net.mode_partition[q])] for q in sorted(net.mode_partition)]
    else:
        wc = [w[np.ix_(c_p, c_t)]]
    return IncidenceBlocks(wd=wd, wc=wc)


def mode_selector(md, f: int) -> np.ndarray:
    """Kronecker mode selector: stacked blocks ``md[q] * I_f`` of shape ``(Q*f, f)``.

    Multiplying the row-concatenation ``[W1 ... WQ]`` by this selector picks
    the active mode's block exactly for a one-hot marking.
    """
    md = np.asarray(md, dtype=float).ravel()
    active_mode(md)  # raises ModeAmbiguityError unless one-hot
    return np.kron(md.reshape(-1, 1), np.eye(f))


def step_discrete(net: NetStructure, md, sigma) -> np.ndarray:
    """Fire ``sigma`` on the discrete layer: ``md' = md + W_d sigma``.

    Every fired transition must be token-enabled (guard conditions are the
    caller's concern since they involve the continuous state), and the
    resulting marking must stay nonnegative.
    """
    md = np.asarray(md, dtype=np.int64)
    sigma = np.asarray(sigma)
    if np.any(sigma < 0) or not np.array_equal(sigma, np.round(sigma)):
        raise EnablingViolationError("firing counts must be nonnegative integers")
    sigma = sigma.astype(np.int64)
    pre_d = net.pre_discrete()
    d_t = net.discrete_transition_indices
    if sigma.shape != (len(d_t),):
        raise DimensionError(
            f"firing vector has length {sigma.shape}, expected {len(d_t)}"
        )
    for j in np.flatnonzero(sigma):
        if np.any(md < pre_d[:, j]):
            name = net.transitions[d_t[j]][0]
            raise EnablingViolationError(f"transition {name} is not token-enabled")
    wd = net.post_discrete() - pre_d
    out = md + wd @ sigma
    if np.any(out < 0):
        raise MarkingUnderflowError(f"firing drives marking negative: {out.tolist()}")
    return out


def step_continuous(mc, wc_blocks, md, u) -> np.ndarray:
    """Advance the continuous marking one step under the active mode.

    The first ``len(u)`` entries (input places) are refreshed with the
    exogenous input before applying ``mc' = mc + W_c_active mc``; with the
    identity pre matrix this equals ``Post_active mc``.
    """
    if isinstance(wc_blocks, IncidenceBlocks):
        wc_blocks = wc_blocks.wc
    mc = np.asarray(mc, dtype=float).copy()
    u = np.atleast_1d(np.asarray(u, dtype=float))
    md = np.asarray(md)
    q = active_mode(md)
    if len(wc_blocks) != len(md):
        raise DimensionError(
            f"{len(wc_blocks)} incidence blocks for {len(md)} mode places"
        )
    w = wc_blocks[q - 1]
    if w.shape[0] != w.shape[1] or w.shape[0] != mc.shape[0]:
        raise DimensionError(f"block shape {w.shape} does not match marking {mc.shape}")
    if len(u) > len(mc):
        raise DimensionError("input longer than the continuous marking")
    mc[: len(u)] = u
    return mc + w @ mc


def decide_firing(model: HybridModel, marking: Marking):
    """Firing vector for the current marking: at most one enabled mode switch.

    A discrete transition is enabled when its source mode is marked and its
    guard holds on the state part of the continuous marking.  Simultaneous
    enabling of distinct transitions is a conflict.
    """
    p = model.p
    x = marking.continuous[p : p + model.n]
    sigma = np.zeros(len(model.guards), dtype=np.int64)
    enabled = [
        j
        for j, g in enumerate(model.guards)
        if marking.discrete[g.from_mode - 1] >= 1 and g.holds(x)
    ]
    if len(enabled) > 1:
        names = [f"t{model.guards[j].from_mode}->{model.guards[j].to_mode}" for j in enabled]
        raise GuardConflictError(f"conflicting enabled transitions: {names}")
    if enabled:
        sigma[enabled[0]] = 1
    return sigma


def step_hybrid(marking: Marking, model: HybridModel, u) -> Marking:
    """One hybrid step: fire the enabled mode switch (if any), then advance.

    The switch is decided from the state at step ``k``, so the continuous
    update already runs under the newly active mode.
    """
    marking_next, _ = hybrid_step_with_firing(marking, model, u)
    return marking_next


def hybrid_step_with_firing(
    marking: Marking,
    model: HybridModel,
    u,
    *,
    allow_firing: bool = True,
    forced_mode: int | None = None,
):
    """Like :func:`step_hybrid` but also returns the firing vector.

    ``allow_firing=False`` suppresses mode switches (frozen marking);
    ``forced_mode`` pins the marking to a given mode without any firing.
    Both hooks exist for fault injection.
    """
    net = model.net()
    blocks = model.incidence_blocks()
    sigma = np.zeros(len(model.guards), dtype=np.int64)
    if forced_mode is not None:
        md = np.zeros(model.n_modes, dtype=np.int64)
        md[forced_mode - 1] = 1
    elif allow_firing:
        sigma = decide_firing(model, marking)
        md = step_discrete(net, marking.discrete, sigma)
    else:
        md = marking.discrete.copy()
    mc = step_continuous(marking.continuous, blocks.wc, md, u)
    return Marking(md, mc, marking.step + 1), sigma


def enabled_transitions(marking: Marking, net: NetStructure, model: HybridModel) -> set:
    """Ids of all enabled transitions under the literal enabling rules.

    Discrete: token condition on every input place plus the guard.
    Continuous: the gating mode place is marked, all continuous input places
    are strictly positive, and the proportional firing speed (the input
    place level) respects the transition's maximum speed.
    """
    names = set()
    d_p = net.discrete_place_indices
    c_p = net.continuous_place_indices
    x = marking.continuous[model.p : model.p + model.n]
    for local_j, j in enumerate(net.discrete_transition_indices):
        name = net.transitions[j][0]
        if np.any(marking.discrete < net.pre[d_p, j]):
            continue
        g = model.guards[local_j]
        if g.holds(x):
            names.add(name)
    for j in net.continuous_transition_indices:
        name = net.transitions[j][0]
        if np.any(marking.discrete < net.pre[d_p, j]):
            continue  # mode test arc unsatisfied
        inputs = np.flatnonzero(net.pre[c_p, j] > 0)
        if inputs.size and np.any(marking.continuous[inputs] <= 0):
            continue
        speed = float(np.max(marking.continuous[inputs])) if inputs.size else 0.0
        if speed > net.timing.get(name, np.inf):
            continue
        names.add(name)
    return names
