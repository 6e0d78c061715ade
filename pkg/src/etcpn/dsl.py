"""Textual model format: strict parser and round-trip serializer.

The format is line-oriented ``key: value`` with ``[section]`` headers and
bracketed numeric blocks.  Numeric entries are constant expressions over
numbers, ``pi``, ``+ - * /``, ``cos`` and ``sin``, so rotation matrices can
be written symbolically.  Parsing is total: any input yields either a
validated document or a list of positioned diagnostics, and nothing in
between.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .detectors import DetectorConfig
from .errors import ModelFormatError
from .net import COMPARATOR_SYMBOLS, GuardPredicate, HybridModel, ModeLti
from .observer import ObserverGains
from .simulate import FaultKind, FaultSpec, InputSignal
from .textfmt import fmt_float


@dataclass(frozen=True)
class Diagnostic:
    line: int
    col: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line}, col {self.col}: {self.message}"


class _ParseFail(Exception):
    def __init__(self, line, col, message):
        self.diagnostic = Diagnostic(line, col, message)
        super().__init__(str(self.diagnostic))


# -- constant-expression evaluator -------------------------------------------

_MAX_DEPTH = 64


class _Expr:
    """Recursive-descent evaluator for the constant-expression grammar."""

    def __init__(self, text: str, line: int, col0: int):
        self.s = text
        self.i = 0
        self.line = line
        self.col0 = col0

    def fail(self, message):
        raise _ParseFail(self.line, self.col0 + self.i, message)

    def peek(self):
        return self.s[self.i] if self.i < len(self.s) else ""

    def skip_ws(self):
        while self.i < len(self.s) and self.s[self.i] in " \t":
            self.i += 1

    def parse(self) -> float:
        value = self.expr(0)
        self.skip_ws()
        if self.i < len(self.s):
            self.fail(f"unexpected trailing input {self.s[self.i:]!r}")
        return value

    def expr(self, depth) -> float:
        if depth > _MAX_DEPTH:
            self.fail("expression too deeply nested")
        value = self.term(depth)
        while True:
            self.skip_ws()
            c = self.peek()
            if c == "+":
                self.i += 1
                value = value + self.term(depth)
            elif c == "-":
                self.i += 1
                value = value - self.term(depth)
            else:
                return value

    def term(self, depth) -> float:
        value = self.unary(depth)
        while True:
            self.skip_ws()
            c = self.peek()
            if c == "*":
                self.i += 1
                value = value * self.unary(depth)
            elif c == "/":
                self.i += 1
                rhs = self.unary(depth)
                if rhs == 0:
                    self.fail("division by zero")
                value = value / rhs
            else:
                return value

    def unary(self, depth) -> float:
        self.skip_ws()
        sign = 1.0
        while self.peek() in ("+", "-"):
            if self.peek() == "-":
                sign = -sign
            self.i += 1
            self.skip_ws()
        return sign * self.atom(depth)

    def atom(self, depth) -> float:
        self.skip_ws()
        c = self.peek()
        if c == "(":
            self.i += 1
            value = self.expr(depth + 1)
            self.skip_ws()
            if self.peek() != ")":
                self.fail("expected ')'")
            self.i += 1
            return value
        if c.isdigit() or c == ".":
            return self.number()
        if c.isalpha():
            start = self.i
            while self.i < len(self.s) and self.s[self.i].isalpha():
                self.i += 1
            word = self.s[start : self.i]
            if word == "pi":
                return math.pi
            if word in ("cos", "sin"):
                self.skip_ws()
                if self.peek() != "(":
                    self.fail(f"expected '(' after {word}")
                self.i += 1
                arg = self.expr(depth + 1)
                self.skip_ws()
                if self.peek() != ")":
                    self.fail("expected ')'")
                self.i += 1
                return math.cos(arg) if word == "cos" else math.sin(arg)
            self.i = start
            self.fail(f"unknown name {word!r}")
        self.fail("expected a number, 'pi', 'cos', 'sin' or '('")

    def number(self) -> float:
        start = self.i
        seen_digit = False
        while self.i < len(self.s) and (self.s[self.i].isdigit() or self.s[self.i] == "."):
            seen_digit = seen_digit or self.s[self.i].isdigit()
            self.i += 1
        if self.i < len(self.s) and self.s[self.i] in "eE":
            j = self.i + 1
            if j < len(self.s) and self.s[j] in "+-":
                j += 1
            if j < len(self.s) and self.s[j].isdigit():
                self.i = j
                while self.i < len(self.s) and self.s[self.i].isdigit():
                    self.i += 1
        text = self.s[start : self.i]
        if not seen_digit:
            self.fail("malformed number")
        try:
            return float(text)
        except ValueError:
            self.fail(f"malformed number {text!r}")


def _eval_expr(text: str, line: int, col: int) -> float:
    return _Expr(text, line, col).parse()


def _parse_matrix(text: str, line: int, col: int) -> np.ndarray:
    s = text.strip()
    offset = col + (len(text) - len(text.lstrip()))
    if not s.startswith("["):
        raise _ParseFail(line, offset, "expected '[' to open a numeric block")
    if not s.endswith("]"):
        raise _ParseFail(line, offset + len(s), "expected ']' to close the block")
    body = s[1:-1]
    rows = []
    row_start = offset + 1
    for row_text in body.split(";"):
        entries = []
        for entry in row_text.split(","):
            if entry.strip() == "":
                raise _ParseFail(line, row_start, "empty matrix entry")
            entries.append(_eval_expr(entry.strip(), line, row_start))
            row_start += len(entry) + 1
        rows.append(entries)
    if not rows or not rows[0]:
        raise _ParseFail(line, offset, "empty matrix block")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise _ParseFail(line, offset, "ragged rows in matrix block")
    return np.array(rows, dtype=float)


# -- document model -----------------------------------------------------------

_MODE_KEYS = ("A", "B", "C", "Fx", "Fy")
_TOP_KEYS = ("model", "dims", "initial_mode", "initial_state")
_GUARD_KEYS = ("from", "to", "component", "comparator", "threshold")
_INPUT_KEYS = ("kind", "amplitude", "period", "phase", "start", "duration", "seed")
_FAULT_KEYS = ("kind", "start", "end", "magnitude", "mode")
_DETECTOR_KEYS = ("nu", "gamma_svdd", "gamma_ocsvm", "contamination")
_FAULT_KINDS = {f.value: f for f in FaultKind}
_INPUT_KINDS = ("constant", "step", "sine", "prbs")


class ModelDocument:
    """Fully validated model description.

    Structural equality compares every numeric field exactly, which is what
    the round-trip guarantee is stated against.
    """

    def __init__(
        self,
        name,
        n,
        p,
        r,
        m_f,
        n_modes,
        modes,
        guards,
        initial_state,
        initial_mode,
        input_signal=None,
        faults=(),
        observer_gains=None,
        detectors=None,
    ):
        self.name = name
        self.n, self.p, self.r, self.m_f, self.n_modes = n, p, r, m_f, n_modes
        self.modes = list(modes)
        self.guards = list(guards)
        self.initial_state = np.asarray(initial_state, dtype=float).ravel()
        self.initial_mode = initial_mode
        self.input_signal = input_signal
        self.faults = list(faults)
        self.observer_gains = observer_gains
        self.detectors = detectors

    def to_model(self) -> HybridModel:
        return HybridModel(
            modes=self.modes,
            guards=self.guards,
            initial_state=self.initial_state,
            initial_mode=self.initial_mode,
            name=self.name,
        )

    def __eq__(self, other):
        if not isinstance(other, ModelDocument):
            return NotImplemented
        if (
            self.name != other.name
            or (self.n, self.p, self.r, self.m_f, self.n_modes)
            != (other.n, other.p, other.r, other.m_f, other.n_modes)
            or self.initial_mode != other.initial_mode
            or not np.array_equal(self.initial_state, other.initial_state)
            or self.guards != other.guards
            or self.input_signal != other.input_signal
            or self.faults != other.faults
            or self.detectors != other.detectors
        ):
            return False
        if len(self.modes) != len(other.modes):
            return False
        for a, b in zip(self.modes, other.modes):
            for key in _MODE_KEYS:
                if not np.array_equal(getattr(a, key), getattr(b, key)):
                    return False
        if (self.observer_gains is None) != (other.observer_gains is None):
            return False
        if self.observer_gains is not None:
            if len(self.observer_gains.L) != len(other.observer_gains.L):
                return False
            for a, b in zip(self.observer_gains.L, other.observer_gains.L):
                if not np.array_equal(a, b):
                    return False
        return True


# -- parsing ------------------------------------------------------------------


def _split_lines(text):
    for idx, raw in enumerate(text.split("\n"), start=1):
        hash_pos = raw.find("#")
        line = raw if hash_pos < 0 else raw[:hash_pos]
        if line.strip():
            yield idx, line


class _Parser:
    def __init__(self, text: str):
        self.diags: list[Diagnostic] = []
        self.top: dict = {}
        self.mode_blocks: dict = {}
        self.guard_blocks: list = []
        self.input_block = None
        self.fault_blocks: list = []
        self.observer_block = None
        self.detector_block = None
        self._parse_sections(text)

    def err(self, line, col, message):
        self.diags.append(Diagnostic(line, col, message))

    def _parse_sections(self, text):
        section = None  # (kind, payload dict, line)
        for line_no, line in _split_lines(text):
            stripped = line.strip()
            indent = len(line) - len(line.lstrip()) + 1
            if stripped.startswith("["):
                if not stripped.endswith("]"):
                    self.err(line_no, indent, "unterminated section header")
                    section = None
                    continue
                header = stripped[1:-1].strip()
                section = self._open_section(header, line_no, indent)
                continue
            key, sep, value = line.partition(":")
            if not sep:
                self.err(line_no, indent, f"expected 'key: value', got {stripped!r}")
                continue
            key_text = key.strip()
            value_col = len(key) + 2
            item = (value.strip(), line_no, value_col)
            if section is None:
                if key_text not in _TOP_KEYS:
                    self.err(line_no, indent, f"unknown top-level key {key_text!r}")
                elif key_text in self.top:
                    self.err(line_no, indent, f"duplicate key {key_text!r}")
                else:
                    self.top[key_text] = item
            else:
                kind, payload = section
                allowed = {
                    "mode": _MODE_KEYS,
                    "guard": _GUARD_KEYS,
                    "input": _INPUT_KEYS,
                    "fault": _FAULT_KEYS,
                    "detectors": _DETECTOR_KEYS,
                }.get(kind)
                if allowed is not None and key_text not in allowed:
                    self.err(line_no, indent, f"unknown key {key_text!r} in [{kind}]")
                elif key_text in payload:
                    self.err(line_no, indent, f"duplicate key {key_text!r} in [{kind}]")
                else:
                    payload[key_text] = item

    def _open_section(self, header, line_no, col):
        parts = header.split()
        kind = parts[0] if parts else ""
        if kind == "mode":
            if len(parts) != 2 or not parts[1].isdigit():
                self.err(line_no, col, "mode header must be '[mode <id>]'")
                return ("mode", {})
            mode_id = int(parts[1])
            if mode_id in self.mode_blocks:
                self.err(line_no, col, f"duplicate mode id {mode_id}")
                return ("mode", {})
            payload = {}
            self.mode_blocks[mode_id] = (payload, line_no)
            return ("mode", payload)
        if kind == "guard" and len(parts) == 1:
            payload = {}
            self.guard_blocks.append((payload, line_no))
            return ("guard", payload)
        if kind == "input" and len(parts) == 1:
            if self.input_block is not None:
                self.err(line_no, col, "duplicate [input] section")
                return ("input", {})
            self.input_block = ({}, line_no)
            return ("input", self.input_block[0])
        if kind == "fault" and len(parts) == 1:
            payload = {}
            self.fault_blocks.append((payload, line_no))
            return ("fault", payload)
        if kind == "observer" and len(parts) == 1:
            if self.observer_block is not None:
                self.err(line_no, col, "duplicate [observer] section")
                return ("observer", {})
            self.observer_block = ({}, line_no)
            return ("observer", self.observer_block[0])
        if kind == "detectors" and len(parts) == 1:
            if self.detector_block is not None:
                self.err(line_no, col, "duplicate [detectors] section")
                return ("detectors", {})
            self.detector_block = ({}, line_no)
            return ("detectors", self.detector_block[0])
        self.err(line_no, col, f"unknown section [{header}]")
        return (kind or "?", {})

    # -- typed readers ------------------------------------------------

    def _number(self, item, what):
        value, line, col = item
        try:
            return _eval_expr(value, line, col)
        except _ParseFail as e:
            self.err(e.diagnostic.line, e.diagnostic.col, f"{what}: {e.diagnostic.message}")
            return None

    def _integer(self, item, what):
        num = self._number(item, what)
        if num is None:
            return None
        if num != int(num):
            self.err(item[1], item[2], f"{what} must be an integer, got {num}")
            return None
        return int(num)

    def _matrix(self, item, what, shape=None):
        value, line, col = item
        try:
            M = _parse_matrix(value, line, col)
        except _ParseFail as e:
            self.err(e.diagnostic.line, e.diagnostic.col, f"{what}: {e.diagnostic.message}")
            return None
        if shape is not None and M.shape != shape:
            self.err(line, col, f"{what} must be {shape[0]}x{shape[1]}, got {M.shape[0]}x{M.shape[1]}")
            return None
        return M

    # -- document assembly ---------------------------------------------

    def build(self):
        if not self.mode_blocks:
            self.err(1, 1, "no modes declared")
            return None

        name = "model"
        if "model" in self.top:
            name = self.top["model"][0]
            if not name:
                self.err(self.top["model"][1], self.top["model"][2], "empty model name")

        dims = self._read_dims()
        if dims is None:
            return None
        n, p, r, m_f, n_modes = dims

        modes = self._read_modes(n, p, r, m_f, n_modes)
        guards = self._read_guards(n, n_modes)
        initial_mode = 1
        if "initial_mode" in self.top:
            value = self._integer(self.top["initial_mode"], "initial_mode")
            if value is not None:
                if 1 <= value <= n_modes:
                    initial_mode = value
                else:
                    item = self.top["initial_mode"]
                    self.err(item[1], item[2], f"initial_mode {value} out of range 1..{n_modes}")
        initial_state = np.zeros(n)
        if "initial_state" in self.top:
            M = self._matrix(self.top["initial_state"], "initial_state")
            if M is not None:
                if M.size != n:
                    item = self.top["initial_state"]
                    self.err(item[1], item[2], f"initial_state must have {n} entries, got {M.size}")
                else:
                    initial_state = M.ravel()

        input_signal = self._read_input()
        faults = self._read_faults(n_modes)
        observer = self._read_observer(n, r, n_modes)
        detectors = self._read_detectors()

        if self.diags:
            return None
        return ModelDocument(
            name=name,
            n=n,
            p=p,
            r=r,
            m_f=m_f,
            n_modes=n_modes,
            modes=modes,
            guards=guards,
            initial_state=initial_state,
            initial_mode=initial_mode,
            input_signal=input_signal,
            faults=faults,
            observer_gains=observer,
            detectors=detectors,
        )

    def _read_dims(self):
        if "dims" not in self.top:
            self.err(1, 1, "missing 'dims:' declaration (n, p, r, mf, modes)")
            return None
        value, line, col = self.top["dims"]
        fields = {}
        pos = col
        for token in value.split():
            key, sep, num = token.partition("=")
            if not sep or key not in ("n", "p", "r", "mf", "modes") or not num.isdigit():
                self.err(line, pos, f"bad dims token {token!r}")
            elif key in fields:
                self.err(line, pos, f"duplicate dims key {key!r}")
            else:
                fields[key] = int(num)
            pos += len(token) + 1
        missing = [k for k in ("n", "p", "r", "mf", "modes") if k not in fields]
        if missing:
            self.err(line, col, f"dims missing {', '.join(missing)}")
            return None
        if min(fields.values()) < 1 and fields.get("mf", 1) >= 0:
            bad = {k: v for k, v in fields.items() if v < (0 if k == "mf" else 1)}
            if bad:
                self.err(line, col, f"dims must be positive: {bad}")
                return None
        return fields["n"], fields["p"], fields["r"], fields["mf"], fields["modes"]

    def _read_modes(self, n, p, r, m_f, n_modes):
        modes = []
        declared = sorted(self.mode_blocks)
        expected = list(range(1, n_modes + 1))
        if declared != expected:
            extra = [q for q in declared if q not in expected]
            absent = [q for q in expected if q not in declared]
            line = self.mode_blocks[declared[0]][1] if declared else 1
            if extra:
                self.err(line, 1, f"mode ids {extra} exceed declared modes={n_modes}")
            if absent:
                self.err(line, 1, f"modes {absent} not declared")
        shapes = {"A": (n, n), "B": (n, p), "C": (r, n), "Fx": (n, m_f), "Fy": (r, m_f)}
        for q in expected:
            if q not in self.mode_blocks:
                continue
            payload, line = self.mode_blocks[q]
            blocks = {}
            for key, shape in shapes.items():
                if key not in payload:
                    self.err(line, 1, f"[mode {q}] missing block {key}")
                    continue
                M = self._matrix(payload[key], f"[mode {q}] {key}", shape)
                if M is not None:
                    blocks[key] = M
            if len(blocks) == len(shapes):
                modes.append(ModeLti(**blocks))
        return modes

    def _read_guards(self, n, n_modes):
        guards = []
        for payload, line in self.guard_blocks:
            ok = True
            for key in _GUARD_KEYS:
                if key not in payload:
                    self.err(line, 1, f"[guard] missing key {key!r}")
                    ok = False
            if not ok:
                continue
            from_mode = self._integer(payload["from"], "[guard] from")
            to_mode = self._integer(payload["to"], "[guard] to")
            component = self._integer(payload["component"], "[guard] component")
            threshold = self._number(payload["threshold"], "[guard] threshold")
            comparator = payload["comparator"][0]
            if comparator not in COMPARATOR_SYMBOLS:
                item = payload["comparator"]
                self.err(item[1], item[2], f"unknown comparator {comparator!r}")
                continue
            if None in (from_mode, to_mode, component, threshold):
                continue
            bad = False
            for label, mode in (("from", from_mode), ("to", to_mode)):
                if not 1 <= mode <= n_modes:
                    item = payload[label]
                    self.err(item[1], item[2], f"[guard] {label} mode {mode} does not exist")
                    bad = True
            if not 1 <= component <= n:
                item = payload["component"]
                self.err(item[1], item[2], f"[guard] component {component} out of range 1..{n}")
                bad = True
            if not bad:
                guards.append(
                    GuardPredicate(component - 1, comparator, threshold, from_mode, to_mode)
                )
        return guards

    def _read_input(self):
        if self.input_block is None:
            return None
        payload, line = self.input_block
        if "kind" not in payload:
            self.err(line, 1, "[input] missing key 'kind'")
            return None
        kind = payload["kind"][0]
        if kind not in _INPUT_KINDS:
            item = payload["kind"]
            self.err(item[1], item[2], f"unknown input kind {kind!r}")
            return None
        kwargs = {"kind": kind}
        for key, conv in (
            ("amplitude", self._number),
            ("period", self._number),
            ("phase", self._number),
            ("start", self._integer),
            ("duration", self._integer),
            ("seed", self._integer),
        ):
            if key in payload:
                value = conv(payload[key], f"[input] {key}")
                if value is not None:
                    kwargs[key] = value
        return InputSignal(**kwargs)

    def _read_faults(self, n_modes):
        faults = []
        for payload, line in self.fault_blocks:
            if "kind" not in payload:
                self.err(line, 1, "[fault] missing key 'kind'")
                continue
            kind_text = payload["kind"][0]
            if kind_text not in _FAULT_KINDS:
                item = payload["kind"]
                self.err(item[1], item[2], f"unknown fault kind {kind_text!r}")
                continue
            kind = _FAULT_KINDS[kind_text]
            start = self._integer(payload["start"], "[fault] start") if "start" in payload else None
            end = self._integer(payload["end"], "[fault] end") if "end" in payload else None
            if start is None or end is None:
                if "start" not in payload:
                    self.err(line, 1, "[fault] missing key 'start'")
                if "end" not in payload:
                    self.err(line, 1, "[fault] missing key 'end'")
                continue
            if end < start:
                self.err(line, 1, f"[fault] interval [{start}, {end}] is empty")
                continue
            magnitude = None
            if "magnitude" in payload and payload["magnitude"][0] != "auto":
                magnitude = self._number(payload["magnitude"], "[fault] magnitude")
            mode = None
            if "mode" in payload:
                mode = self._integer(payload["mode"], "[fault] mode")
                if mode is not None and not 1 <= mode <= n_modes:
                    item = payload["mode"]
                    self.err(item[1], item[2], f"[fault] mode {mode} does not exist")
                    continue
            if kind is FaultKind.MODE_BLOCKING and mode is None:
                pass  # freeze-in-place blocking is allowed
            faults.append(FaultSpec(kind, start, end, magnitude, mode))
        return faults

    def _read_observer(self, n, r, n_modes):
        if self.observer_block is None:
            return None
        payload, line = self.observer_block
        gains = {}
        lyap = {}
        for key, item in payload.items():
            if key.startswith("L") and key[1:].isdigit():
                q = int(key[1:])
                target, shape = gains, (n, r)
            elif key.startswith("P") and key[1:].isdigit():
                q = int(key[1:])
                target, shape = lyap, (n, n)
            else:
                self.err(item[1], item[2], f"unknown key {key!r} in [observer]")
                continue
            if not 1 <= q <= n_modes:
                self.err(item[1], item[2], f"[observer] mode {q} does not exist")
                continue
            M = self._matrix(item, f"[observer] {key}", shape)
            if M is not None:
                target[q] = M
        if sorted(gains) != list(range(1, n_modes + 1)):
            self.err(line, 1, f"[observer] needs gains L1..L{n_modes}")
            return None
        P = None
        if lyap:
            if sorted(lyap) != list(range(1, n_modes + 1)):
                self.err(line, 1, f"[observer] Lyapunov blocks must cover P1..P{n_modes}")
            else:
                P = [lyap[q] for q in range(1, n_modes + 1)]
        return ObserverGains(L=[gains[q] for q in range(1, n_modes + 1)], P=P)

    def _read_detectors(self):
        if self.detector_block is None:
            return None
        payload, line = self.detector_block
        kwargs = {}
        for key in ("nu", "gamma_svdd", "contamination"):
            if key in payload:
                value = self._number(payload[key], f"[detectors] {key}")
                if value is not None:
                    kwargs[key] = value
        if "gamma_ocsvm" in payload:
            text = payload["gamma_ocsvm"][0]
            if text == "scale":
                kwargs["gamma_ocsvm"] = "scale"
            else:
                value = self._number(payload["gamma_ocsvm"], "[detectors] gamma_ocsvm")
                if value is not None:
                    kwargs["gamma_ocsvm"] = value
        try:
            return DetectorConfig(**kwargs)
        except Exception as e:  # range violations from the config itself
            self.err(line, 1, f"[detectors] {e}")
            return None


def parse_with_diagnostics(text):
    """Parse model text; returns ``(document | None, diagnostics)``."""
    if isinstance(text, bytes):
        text = text.decode("utf-8", errors="replace")
    try:
        parser = _Parser(text)
        doc = parser.build()
        return doc, parser.diags
    except _ParseFail as e:
        return None, [e.diagnostic]
    except RecursionError:
        return None, [Diagnostic(1, 1, "input too deeply nested")]


def parse(text) -> ModelDocument:
    """Parse and validate model text, raising with all diagnostics on failure."""
    doc, diags = parse_with_diagnostics(text)
    if doc is None:
        raise ModelFormatError(diags or [Diagnostic(1, 1, "invalid model text")])
    return doc


def load(path) -> ModelDocument:
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        return parse(fh.read())


def benchmark_path():
    """Filesystem path of the packaged two-mode benchmark fixture."""
    from importlib.resources import files

    return files("etcpn").joinpath("data/benchmark_two_mode.etcpn")


def load_benchmark() -> ModelDocument:
    return parse(benchmark_path().read_text(encoding="utf-8"))


# -- serialization ------------------------------------------------------------


def _fmt_block(M) -> str:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return "[" + "; ".join(", ".join(fmt_float(v) for v in row) for row in M) + "]"


def serialize(doc: ModelDocument) -> str:
    """Canonical text for a document; parsing it reproduces the document."""
    out = [
        f"model: {doc.name}",
        f"dims: n={doc.n} p={doc.p} r={doc.r} mf={doc.m_f} modes={doc.n_modes}",
        f"initial_mode: {doc.initial_mode}",
        f"initial_state: {_fmt_block(doc.initial_state)}",
    ]
    for q, mode in enumerate(doc.modes, start=1):
        out.append("")
        out.append(f"[mode {q}]")
        for key in _MODE_KEYS:
            out.append(f"{key}: {_fmt_block(getattr(mode, key))}")
    for g in doc.guards:
        out += [
            "",
            "[guard]",
            f"from: {g.from_mode}",
            f"to: {g.to_mode}",
            f"component: {g.component + 1}",
            f"comparator: {g.comparator}",
            f"threshold: {fmt_float(g.threshold)}",
        ]
    if doc.input_signal is not None:
        sig = doc.input_signal
        out += ["", "[input]", f"kind: {sig.kind}", f"amplitude: {fmt_float(sig.amplitude)}"]
        out.append(f"period: {fmt_float(sig.period)}")
        out.append(f"phase: {fmt_float(sig.phase)}")
        out.append(f"start: {sig.start}")
        if sig.duration is not None:
            out.append(f"duration: {sig.duration}")
        if sig.seed is not None:
            out.append(f"seed: {sig.seed}")
    for spec in doc.faults:
        out += [
            "",
            "[fault]",
            f"kind: {spec.kind.value}",
            f"start: {spec.start}",
            f"end: {spec.end}",
        ]
        if spec.magnitude is None:
            out.append("magnitude: auto")
        else:
            out.append(f"magnitude: {fmt_float(spec.magnitude)}")
        if spec.mode is not None:
            out.append(f"mode: {spec.mode}")
    if doc.observer_gains is not None:
        out += ["", "[observer]"]
        for q, L in enumerate(doc.observer_gains.L, start=1):
            out.append(f"L{q}: {_fmt_block(L)}")
        if doc.observer_gains.P is not None:
            for q, P in enumerate(doc.observer_gains.P, start=1):
                out.append(f"P{q}: {_fmt_block(P)}")
    if doc.detectors is not None:
        cfg = doc.detectors
        gamma = cfg.gamma_ocsvm if cfg.gamma_ocsvm == "scale" else fmt_float(cfg.gamma_ocsvm)
        out += [
            "",
            "[detectors]",
            f"nu: {fmt_float(cfg.nu)}",
            f"gamma_svdd: {fmt_float(cfg.gamma_svdd)}",
            f"gamma_ocsvm: {gamma}",
            f"contamination: {fmt_float(cfg.contamination)}",
        ]
    return "\n".join(out) + "\n"


# -- gains files --------------------------------------------------------------


def serialize_gains(gains: ObserverGains) -> str:
    out = ["[observer]"]
    for q, L in enumerate(gains.L, start=1):
        out.append(f"L{q}: {_fmt_block(L)}")
    if gains.P is not None:
        for q, P in enumerate(gains.P, start=1):
            out.append(f"P{q}: {_fmt_block(P)}")
    return "\n".join(out) + "\n"


def parse_gains(text, n: int, r: int) -> ObserverGains:
    """Read an [observer] block as written by :func:`serialize_gains`."""
    if isinstance(text, bytes):
        text = text.decode("utf-8", errors="replace")
    gains = {}
    lyap = {}
    diags = []
    for line_no, line in _split_lines(text):
        stripped = line.strip()
        if stripped.startswith("["):
            continue
        key, sep, value = line.partition(":")
        key = key.strip()
        if not sep:
            diags.append(Diagnostic(line_no, 1, f"expected 'key: value', got {stripped!r}"))
            continue
        try:
            M = _parse_matrix(value, line_no, len(key) + 2)
        except _ParseFail as e:
            diags.append(e.diagnostic)
            continue
        if key.startswith("L") and key[1:].isdigit():
            gains[int(key[1:])] = M
        elif key.startswith("P") and key[1:].isdigit():
            lyap[int(key[1:])] = M
        else:
            diags.append(Diagnostic(line_no, 1, f"unknown gains key {key!r}"))
    if diags:
        raise ModelFormatError(diags)
    if not gains or sorted(gains) != list(range(1, len(gains) + 1)):
        raise ModelFormatError([Diagnostic(1, 1, "gains file must define L1..LQ")])
    for q, M in gains.items():
        if M.shape != (n, r):
            raise ModelFormatError(
                [Diagnostic(1, 1, f"L{q} must be {n}x{r}, got {M.shape[0]}x{M.shape[1]}")]
            )
    P = None
    if lyap and sorted(lyap) == sorted(gains):
        P = [lyap[q] for q in sorted(lyap)]
    return ObserverGains(L=[gains[q] for q in sorted(gains)], P=P)
