"""Brute-force oracles shared across test modules.

Everything here is written independently of the library code paths it
checks: plain loops, direct recurrences and literal definitions.
"""

import numpy as np

from etcpn.net import GuardPredicate, HybridModel, ModeLti

COS60 = np.cos(np.pi / 3)
SIN60 = np.sin(np.pi / 3)
COS120 = np.cos(2 * np.pi / 3)
SIN120 = np.sin(2 * np.pi / 3)


def rotation_mode(c, s):
    return ModeLti(
        A=[[c, s], [-s, c]],
        B=[[1.0], [0.0]],
        C=[[0.0, 1.0]],
        Fx=[[1.0], [0.0]],
        Fy=[[1.0]],
    )


def make_benchmark_model(x0=(0.0, 0.0), initial_mode=1):
    """Two-mode rotation benchmark built directly from its matrices."""
    return HybridModel(
        modes=[rotation_mode(COS60, SIN60), rotation_mode(COS120, SIN120)],
        guards=[
            GuardPredicate(0, ">", 0.0, from_mode=1, to_mode=2),
            GuardPredicate(0, "<=", 0.0, from_mode=2, to_mode=1),
        ],
        initial_state=np.asarray(x0, dtype=float),
        initial_mode=initial_mode,
        name="benchmark_two_mode",
    )


def switch_mode(model, q, x):
    """Literal guard evaluation: next mode from the current mode and state."""
    fired = [g for g in model.guards if g.from_mode == q and g.holds(x)]
    if len(fired) > 1:
        raise AssertionError("oracle hit conflicting guards")
    return fired[0].to_mode if fired else q


def switched_state_space(model, x0, u_seq, steps):
    """Direct iteration of the switched recurrence, one scalar loop per entry.

    Returns (modes, states) where states[k] is x(k) and modes[k] the mode
    active during step k (decided from x(k)).
    """
    x = np.asarray(x0, dtype=float).copy()
    q = model.initial_mode
    modes, states = [], []
    for k in range(steps):
        q = switch_mode(model, q, x)
        modes.append(q)
        states.append(x.copy())
        m = model.mode(q)
        u = np.atleast_1d(np.asarray(u_seq[k], dtype=float))
        x_next = np.zeros(model.n)
        for i in range(model.n):
            acc = 0.0
            for j in range(model.n):
                acc += m.A[i, j] * x[j]
            for j in range(model.p):
                acc += m.B[i, j] * u[j]
            x_next[i] = acc
        x = x_next
    return np.array(modes), np.array(states)


def quadratic_roots(a, b, c):
    """Roots of a x^2 + b x + c via the numerically stable formula."""
    disc = b * b - 4 * a * c
    sq = np.sqrt(complex(disc))
    r1 = (-b - sq) / (2 * a)
    r2 = (-b + sq) / (2 * a)
    return r1, r2


def char_poly_eigenvalues(M):
    """Eigenvalues of a 2x2 matrix from its characteristic polynomial."""
    M = np.asarray(M, dtype=float)
    assert M.shape == (2, 2)
    tr = M[0, 0] + M[1, 1]
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    return quadratic_roots(1.0, -tr, det)


def random_spd(rng, n, scale=1.0):
    M = rng.standard_normal((n, n))
    return scale * (M @ M.T) + 0.1 * scale * np.eye(n)


def paper_benchmark_gains():
    """The study's printed observer gains, with the trig values kept exact.

    The printed 0.866 entries are 3-decimal roundings of sin(pi/3) and
    sin(2*pi/3); the exact values make the closed-loop eigenvalue checks
    meaningful at tight tolerance.
    """
    from etcpn.observer import ObserverGains

    L1 = np.array([[SIN60], [COS60]])
    L2 = np.array([[SIN120], [-0.5]])
    return ObserverGains(L=[L1, L2])


BENCHMARK_C = np.array([[0.0, 1.0]])


def random_document(rng):
    """A random but valid model document for round-trip checks."""
    from etcpn.detectors import DetectorConfig
    from etcpn.dsl import ModelDocument
    from etcpn.net import GuardPredicate
    from etcpn.observer import ObserverGains
    from etcpn.simulate import FaultKind, FaultSpec, InputSignal

    n = int(rng.integers(1, 4))
    p = int(rng.integers(1, 3))
    r = int(rng.integers(1, n + 1))
    m_f = int(rng.integers(1, 3))
    Q = int(rng.integers(1, 4))
    modes = [
        rotation_mode(0, 0).__class__(
            A=rng.standard_normal((n, n)),
            B=rng.standard_normal((n, p)),
            C=rng.standard_normal((r, n)),
            Fx=rng.standard_normal((n, m_f)),
            Fy=rng.standard_normal((r, m_f)),
        )
        for _ in range(Q)
    ]
    guards = []
    if Q > 1:
        for _ in range(int(rng.integers(0, 4))):
            guards.append(
                GuardPredicate(
                    component=int(rng.integers(0, n)),
                    comparator=str(rng.choice([">", ">=", "<", "<="])),
                    threshold=float(np.round(rng.standard_normal(), 6)),
                    from_mode=int(rng.integers(1, Q + 1)),
                    to_mode=int(rng.integers(1, Q + 1)),
                )
            )
    input_signal = None
    if rng.random() < 0.7:
        kind = str(rng.choice(["constant", "step", "sine", "prbs"]))
        input_signal = InputSignal(
            kind=kind,
            amplitude=float(np.round(rng.uniform(-2, 2), 8)),
            period=float(np.round(rng.uniform(2, 30), 8)),
            start=int(rng.integers(0, 5)),
            duration=int(rng.integers(1, 9)) if rng.random() < 0.5 else None,
            seed=int(rng.integers(0, 99)) if kind == "prbs" else None,
        )
    faults = []
    for _ in range(int(rng.integers(0, 3))):
        kind = rng.choice(list(FaultKind))
        start = int(rng.integers(0, 20))
        faults.append(
            FaultSpec(
                kind,
                start,
                start + int(rng.integers(0, 10)),
                float(np.round(rng.uniform(0.1, 2.0), 8)) if rng.random() < 0.5 else None,
                int(rng.integers(1, Q + 1)) if kind is FaultKind.MODE_BLOCKING else None,
            )
        )
    observer = None
    if rng.random() < 0.5:
        observer = ObserverGains(L=[rng.standard_normal((n, r)) for _ in range(Q)])
    detectors = None
    if rng.random() < 0.5:
        detectors = DetectorConfig(
            nu=float(np.round(rng.uniform(0.05, 0.9), 8)),
            gamma_svdd=float(np.round(rng.uniform(0.01, 2.0), 8)),
            gamma_ocsvm="scale" if rng.random() < 0.5 else float(np.round(rng.uniform(0.1, 5), 8)),
            contamination=float(np.round(rng.uniform(0.01, 0.4), 8)),
        )
    return ModelDocument(
        name=f"doc{int(rng.integers(0, 1000))}",
        n=n,
        p=p,
        r=r,
        m_f=m_f,
        n_modes=Q,
        modes=modes,
        guards=guards,
        initial_state=rng.standard_normal(n),
        initial_mode=int(rng.integers(1, Q + 1)),
        input_signal=input_signal,
        faults=faults,
        observer_gains=observer,
        detectors=detectors,
    )
