"""Circuit intermediate representation and an OpenQASM 2.0 subset reader/writer.

Bit order: qubit 0 is the least significant bit of a basis index, and it is
the rightmost character of a rendered bitstring.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class QasmError(ValueError):
    """Raised for malformed or unsupported QASM input."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.line = line
        self.col = col
        where = ""
        if line is not None:
            where = f"line {line}" + (f", col {col}" if col is not None else "") + ": "
        super().__init__(where + message)


class UnsupportedGateError(QasmError):
    def __init__(self, name: str, line: int | None = None, col: int | None = None):
        self.gate = name
        super().__init__(f"unsupported gate '{name}'", line, col)


class GateKind(enum.Enum):
    """Supported gates, each with a fixed arity and parameter count."""

    ID = ("id", 1, 0)
    X = ("x", 1, 0)
    Y = ("y", 1, 0)
    Z = ("z", 1, 0)
    H = ("h", 1, 0)
    S = ("s", 1, 0)
    SDG = ("sdg", 1, 0)
    T = ("t", 1, 0)
    TDG = ("tdg", 1, 0)
    RX = ("rx", 1, 1)
    RY = ("ry", 1, 1)
    RZ = ("rz", 1, 1)
    P = ("p", 1, 1)
    U = ("u", 1, 3)
    CX = ("cx", 2, 0)
    CZ = ("cz", 2, 0)
    CP = ("cp", 2, 1)
    CRX = ("crx", 2, 1)
    CRY = ("cry", 2, 1)
    CRZ = ("crz", 2, 1)
    SWAP = ("swap", 2, 0)
    CCX = ("ccx", 3, 0)
    # pseudo-ops; barrier spans any number of qubits
    MEASURE = ("measure", 1, 0)
    BARRIER = ("barrier", 0, 0)

    def __init__(self, qasm_name: str, arity: int, n_params: int):
        self.qasm_name = qasm_name
        self.arity = arity
        self.n_params = n_params

    @property
    def is_pseudo(self) -> bool:
        return self in (GateKind.MEASURE, GateKind.BARRIER)

    @classmethod
    def from_name(cls, name: str) -> "GateKind":
        try:
            return _BY_NAME[name]
        except KeyError:
            raise UnsupportedGateError(name) from None


_BY_NAME = {k.qasm_name: k for k in GateKind}

UNITARY_KINDS: tuple[GateKind, ...] = tuple(k for k in GateKind if not k.is_pseudo)


@dataclass(frozen=True)
class GateOp:
    kind: GateKind
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.kind is not GateKind.BARRIER and len(self.qubits) != self.kind.arity:
            raise ValueError(
                f"{self.kind.qasm_name} takes {self.kind.arity} qubit(s), got {len(self.qubits)}"
            )
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"repeated qubit in {self.kind.qasm_name} {self.qubits}")
        if len(self.params) != self.kind.n_params:
            raise ValueError(
                f"{self.kind.qasm_name} takes {self.kind.n_params} parameter(s), got {len(self.params)}"
            )

    @property
    def name(self) -> str:
        return self.kind.qasm_name

    def matrix(self) -> np.ndarray:
        return gate_matrix(self.kind, self.params)

    def __str__(self) -> str:
        args = ""
        if self.params:
            args = "(" + ",".join(f"{p:.6g}" for p in self.params) + ")"
        return f"{self.name}{args} " + ",".join(f"q{q}" for q in self.qubits)


@dataclass(frozen=True)
class Circuit:
    """An immutable gate list over ``n_qubits`` qubits.

    ``measured`` records a terminal measurement of the full register.
    """

    n_qubits: int
    ops: tuple[GateOp, ...] = ()
    name: str = "circuit"
    measured: bool = False

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))
        if self.n_qubits < 1:
            raise ValueError("a circuit needs at least one qubit")
        for op in self.ops:
            if op.kind is GateKind.MEASURE:
                raise ValueError("measurements are expressed through the 'measured' flag")
            if any(q < 0 or q >= self.n_qubits for q in op.qubits):
                raise ValueError(f"{op} addresses a qubit outside [0, {self.n_qubits})")

    @property
    def gates(self) -> tuple[GateOp, ...]:
        """Unitary ops only (barriers dropped)."""
        return tuple(op for op in self.ops if not op.kind.is_pseudo)

    def with_ops(self, ops: Iterable[GateOp], name: str | None = None) -> "Circuit":
        return Circuit(self.n_qubits, tuple(ops), name or self.name, self.measured)

    def __len__(self) -> int:
        return len(self.gates)


@dataclass(frozen=True)
class CircuitCharacteristics:
    n_qubits: int
    n_gates: int
    depth: int
    n_single_qubit_gates: int
    n_multi_qubit_gates: int


# ---------------------------------------------------------------------------
# gate matrices
# ---------------------------------------------------------------------------

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_S = np.diag([1, 1j]).astype(complex)
_T = np.diag([1, np.exp(1j * math.pi / 4)])


def _rx(t):
    c, s = math.cos(t / 2), math.sin(t / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def _ry(t):
    c, s = math.cos(t / 2), math.sin(t / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _rz(t):
    return np.diag([np.exp(-0.5j * t), np.exp(0.5j * t)])


def _phase(lam):
    return np.diag([1, np.exp(1j * lam)])


def _u(theta, phi, lam):
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array(
        [
            [c, -np.exp(1j * lam) * s],
            [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c],
        ],
        dtype=complex,
    )


def _controlled(u: np.ndarray) -> np.ndarray:
    d = u.shape[0]
    out = np.eye(2 * d, dtype=complex)
    out[d:, d:] = u
    return out


_FIXED = {
    GateKind.ID: _I2,
    GateKind.X: _X,
    GateKind.Y: _Y,
    GateKind.Z: _Z,
    GateKind.H: _H,
    GateKind.S: _S,
    GateKind.SDG: _S.conj(),
    GateKind.T: _T,
    GateKind.TDG: _T.conj(),
    GateKind.CX: _controlled(_X),
    GateKind.CZ: _controlled(_Z),
    GateKind.SWAP: np.array(
        [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
    ),
    GateKind.CCX: _controlled(_controlled(_X)),
}

_PARAMETRIC = {
    GateKind.RX: _rx,
    GateKind.RY: _ry,
    GateKind.RZ: _rz,
    GateKind.P: _phase,
    GateKind.U: _u,
    GateKind.CP: lambda t: _controlled(_phase(t)),
    GateKind.CRX: lambda t: _controlled(_rx(t)),
    GateKind.CRY: lambda t: _controlled(_ry(t)),
    GateKind.CRZ: lambda t: _controlled(_rz(t)),
}


def gate_matrix(kind: GateKind, params: Sequence[float] = ()) -> np.ndarray:
    """Unitary of ``kind`` in the op's own qubit order.

    The first listed qubit is the most significant index bit of the returned
    matrix, so for controlled gates the control comes first.
    """
    if kind.is_pseudo:
        raise ValueError(f"{kind.qasm_name} has no matrix")
    if len(params) != kind.n_params:
        raise ValueError(f"{kind.qasm_name} takes {kind.n_params} parameter(s)")
    if kind in _FIXED:
        return _FIXED[kind].copy()
    return _PARAMETRIC[kind](*params)


def decompose_ccx(op: GateOp) -> list[GateOp]:
    """Standard 6-CNOT Toffoli decomposition into 1q and 2q gates."""
    a, b, c = op.qubits
    seq = [
        (GateKind.H, (c,)),
        (GateKind.CX, (b, c)),
        (GateKind.TDG, (c,)),
        (GateKind.CX, (a, c)),
        (GateKind.T, (c,)),
        (GateKind.CX, (b, c)),
        (GateKind.TDG, (c,)),
        (GateKind.CX, (a, c)),
        (GateKind.T, (b,)),
        (GateKind.T, (c,)),
        (GateKind.H, (c,)),
        (GateKind.CX, (a, b)),
        (GateKind.T, (a,)),
        (GateKind.TDG, (b,)),
        (GateKind.CX, (a, b)),
    ]
    return [GateOp(k, q) for k, q in seq]


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*)
  | (?P<real>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"[^"\n]*")
  | (?P<arrow>->)
  | (?P<sym>[;,\[\]()+\-*/^{}])
    """,
    re.VERBOSE,
)

# aliases accepted on input; the writer always emits canonical names
_ALIASES = {"U": "u", "u3": "u", "CX": "cx", "cnot": "cx", "cu1": "cp", "i": "id"}


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise QasmError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        chunk = m.group()
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()
    return toks


class _Parser:
    def __init__(self, text: str, name: str):
        self.toks = _tokenize(text)
        self.i = 0
        self.name = name
        self.qreg: tuple[str, int] | None = None
        self.creg: tuple[str, int] | None = None
        self.ops: list[GateOp] = []
        self.measured_qubits: set[int] = set()

    # token helpers
    def peek(self) -> _Tok | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def next(self) -> _Tok:
        tok = self.peek()
        if tok is None:
            last = self.toks[-1] if self.toks else None
            raise QasmError("unexpected end of input", last.line if last else 1, None)
        self.i += 1
        return tok

    def expect(self, text: str) -> _Tok:
        tok = self.next()
        if tok.text != text:
            raise QasmError(f"expected '{text}', found '{tok.text}'", tok.line, tok.col)
        return tok

    def accept(self, text: str) -> bool:
        tok = self.peek()
        if tok is not None and tok.text == text:
            self.i += 1
            return True
        return False

    def ident(self) -> _Tok:
        tok = self.next()
        if tok.kind != "id":
            raise QasmError(f"expected identifier, found '{tok.text}'", tok.line, tok.col)
        return tok

    def integer(self) -> int:
        tok = self.next()
        if tok.kind != "real" or not tok.text.isdigit():
            raise QasmError(f"expected integer, found '{tok.text}'", tok.line, tok.col)
        return int(tok.text)

    # angle expressions: + - * / ^, unary minus, parentheses, pi, numbers,
    # and the qelib1 unary functions
    def expr(self) -> float:
        val = self.term()
        while (tok := self.peek()) is not None and tok.text in "+-" and tok.kind == "sym":
            self.i += 1
            rhs = self.term()
            val = val + rhs if tok.text == "+" else val - rhs
        return val

    def term(self) -> float:
        val = self.factor()
        while (tok := self.peek()) is not None and tok.text in "*/" and tok.kind == "sym":
            self.i += 1
            rhs = self.factor()
            if tok.text == "*":
                val *= rhs
            else:
                if rhs == 0:
                    raise QasmError("division by zero", tok.line, tok.col)
                val /= rhs
        return val

    def factor(self) -> float:
        base = self.unary()
        if self.accept("^"):
            return base ** self.factor()
        return base

    _FUNCS = {"sin": math.sin, "cos": math.cos, "tan": math.tan, "exp": math.exp,
              "ln": math.log, "sqrt": math.sqrt}

    def unary(self) -> float:
        tok = self.next()
        if tok.text == "-":
            return -self.unary()
        if tok.text == "+":
            return self.unary()
        if tok.text == "(":
            val = self.expr()
            self.expect(")")
            return val
        if tok.kind == "real":
            return float(tok.text)
        if tok.kind == "id":
            if tok.text == "pi":
                return math.pi
            if tok.text in self._FUNCS:
                self.expect("(")
                val = self.expr()
                self.expect(")")
                return self._FUNCS[tok.text](val)
        raise QasmError(f"bad angle expression at '{tok.text}'", tok.line, tok.col)

    def qubit_args(self) -> list[tuple[_Tok, int | None]]:
        """Comma-separated qubit references; ``None`` index means whole register."""
        args = [self.qubit_ref()]
        while self.accept(","):
            args.append(self.qubit_ref())
        return args

    def qubit_ref(self) -> tuple[_Tok, int | None]:
        tok = self.ident()
        if self.qreg is None or tok.text != self.qreg[0]:
            raise QasmError(f"unknown quantum register '{tok.text}'", tok.line, tok.col)
        idx = None
        if self.accept("["):
            idx = self.integer()
            self.expect("]")
            if idx >= self.qreg[1]:
                raise QasmError(
                    f"index {idx} out of range for {tok.text}[{self.qreg[1]}]", tok.line, tok.col
                )
        return tok, idx

    def parse(self) -> Circuit:
        tok = self.next()
        if tok.text != "OPENQASM":
            raise QasmError("program must start with 'OPENQASM 2.0;'", tok.line, tok.col)
        ver = self.next()
        if ver.text not in ("2.0", "2"):
            raise QasmError(f"unsupported OPENQASM version {ver.text}", ver.line, ver.col)
        self.expect(";")
        while self.peek() is not None:
            self.statement()
        if self.qreg is None:
            raise QasmError("no quantum register declared")
        n = self.qreg[1]
        if self.measured_qubits and self.measured_qubits != set(range(n)):
            raise QasmError("only full-register terminal measurement is supported")
        return Circuit(n, tuple(self.ops), self.name, bool(self.measured_qubits))

    def statement(self):
        tok = self.ident()
        word = tok.text
        if word == "include":
            s = self.next()
            if s.kind != "string":
                raise QasmError("include expects a quoted file name", s.line, s.col)
            self.expect(";")
        elif word in ("qreg", "creg"):
            name = self.ident().text
            self.expect("[")
            size = self.integer()
            self.expect("]")
            self.expect(";")
            if size < 1:
                raise QasmError(f"register {name} must have positive size", tok.line, tok.col)
            if word == "qreg":
                if self.qreg is not None:
                    raise QasmError("only one quantum register is supported", tok.line, tok.col)
                self.qreg = (name, size)
            else:
                if self.creg is not None:
                    raise QasmError("only one classical register is supported", tok.line, tok.col)
                self.creg = (name, size)
        elif word == "measure":
            self.measure(tok)
        elif word == "barrier":
            self.require_qreg(tok)
            args = self.qubit_args()
            self.expect(";")
            qubits: list[int] = []
            for _, idx in args:
                qubits.extend(range(self.qreg[1]) if idx is None else [idx])
            if len(set(qubits)) != len(qubits):
                raise QasmError("repeated qubit in barrier", tok.line, tok.col)
            self.ops.append(GateOp(GateKind.BARRIER, tuple(qubits)))
        elif word in ("gate", "opaque", "if", "reset"):
            raise QasmError(f"'{word}' statements are not supported", tok.line, tok.col)
        else:
            self.gate(tok)

    def require_qreg(self, tok: _Tok):
        if self.qreg is None:
            raise QasmError("quantum register used before declaration", tok.line, tok.col)

    def measure(self, tok: _Tok):
        self.require_qreg(tok)
        q_tok, q_idx = self.qubit_ref()
        self.expect("->")
        c_tok = self.ident()
        if self.creg is None or c_tok.text != self.creg[0]:
            raise QasmError(f"unknown classical register '{c_tok.text}'", c_tok.line, c_tok.col)
        c_idx = None
        if self.accept("["):
            c_idx = self.integer()
            self.expect("]")
        self.expect(";")
        if (q_idx is None) != (c_idx is None):
            raise QasmError("register arity mismatch in measure", tok.line, tok.col)
        if q_idx is None:
            if self.creg[1] != self.qreg[1]:
                raise QasmError("register arity mismatch in measure", tok.line, tok.col)
            self.measured_qubits.update(range(self.qreg[1]))
        else:
            if c_idx >= self.creg[1]:
                raise QasmError("classical index out of range", c_tok.line, c_tok.col)
            if c_idx != q_idx:
                raise QasmError("measurement must map q[i] to c[i]", tok.line, tok.col)
            self.measured_qubits.add(q_idx)

    def gate(self, tok: _Tok):
        self.require_qreg(tok)
        if self.measured_qubits:
            raise QasmError("mid-circuit measurement is not supported", tok.line, tok.col)
        name = _ALIASES.get(tok.text, tok.text)
        params: list[float] = []
        if self.accept("("):
            if not self.accept(")"):
                params.append(self.expr())
                while self.accept(","):
                    params.append(self.expr())
                self.expect(")")
        if name == "u1":
            name = "p"
        elif name == "u2":
            if len(params) != 2:
                raise QasmError("u2 takes 2 parameters", tok.line, tok.col)
            name, params = "u", [math.pi / 2, *params]
        try:
            kind = GateKind.from_name(name)
        except UnsupportedGateError:
            raise UnsupportedGateError(tok.text, tok.line, tok.col) from None
        if kind.is_pseudo:
            raise UnsupportedGateError(tok.text, tok.line, tok.col)
        if len(params) != kind.n_params:
            raise QasmError(
                f"{name} takes {kind.n_params} parameter(s), got {len(params)}", tok.line, tok.col
            )
        args = self.qubit_args()
        self.expect(";")
        if len(args) != kind.arity:
            raise QasmError(
                f"register arity mismatch: {name} takes {kind.arity} qubit(s), got {len(args)}",
                tok.line,
                tok.col,
            )
        if kind.arity == 1 and args[0][1] is None:
            targets = [(q,) for q in range(self.qreg[1])]
        elif any(idx is None for _, idx in args):
            raise QasmError("register broadcast is only supported for 1-qubit gates", tok.line, tok.col)
        else:
            targets = [tuple(idx for _, idx in args)]
        for qubits in targets:
            if len(set(qubits)) != len(qubits):
                raise QasmError(f"repeated qubit argument to {name}", tok.line, tok.col)
            self.ops.append(GateOp(kind, qubits, tuple(params)))


def parse_qasm(text: str, name: str = "circuit") -> Circuit:
    """Parse an OpenQASM 2.0 program restricted to the supported gate set."""
    return _Parser(text, name).parse()


def load_qasm(path) -> Circuit:
    from pathlib import Path

    path = Path(path)
    return parse_qasm(path.read_text(encoding="utf-8"), name=path.stem)


def _fmt_angle(x: float) -> str:
    return repr(float(x))


def emit_qasm(c: Circuit) -> str:
    lines = ["OPENQASM 2.0;", 'include "qelib1.inc";', f"qreg q[{c.n_qubits}];"]
    if c.measured:
        lines.append(f"creg c[{c.n_qubits}];")
    for op in c.ops:
        args = ",".join(f"q[{q}]" for q in op.qubits)
        if op.params:
            lines.append(f"{op.name}({','.join(_fmt_angle(p) for p in op.params)}) {args};")
        else:
            lines.append(f"{op.name} {args};")
    if c.measured:
        lines.append("measure q -> c;")
    return "\n".join(lines) + "\n"


def compose(prep: Circuit, body: Circuit) -> Circuit:
    """Prepend ``prep`` to ``body``; the measurement flag comes from ``body``."""
    if prep.n_qubits != body.n_qubits:
        raise ValueError(
            f"cannot compose a {prep.n_qubits}-qubit prep with a {body.n_qubits}-qubit circuit"
        )
    if prep.measured:
        raise ValueError("input preparation must not measure")
    return Circuit(body.n_qubits, prep.ops + body.ops, body.name, body.measured)


def characteristics(c: Circuit) -> CircuitCharacteristics:
    level = [0] * c.n_qubits
    single = multi = 0
    for op in c.gates:
        d = 1 + max(level[q] for q in op.qubits)
        for q in op.qubits:
            level[q] = d
        if op.kind.arity == 1:
            single += 1
        else:
            multi += 1
    return CircuitCharacteristics(
        n_qubits=c.n_qubits,
        n_gates=single + multi,
        depth=max(level),
        n_single_qubit_gates=single,
        n_multi_qubit_gates=multi,
    )
