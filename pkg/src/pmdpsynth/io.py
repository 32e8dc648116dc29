"""Reading and writing the plain-text model format and specification strings.

Model files look like::

    pmdp
    parameters: v
    states: 5
    initial: 0
    label target: 3
    cost 0 a: 1            # optional
    state 0
    action a
      1 : v
      4 : 1 - v

``#`` starts a comment.  Rationals are written ``a/b`` or as decimals.
"""

from __future__ import annotations

import re
from fractions import Fraction
from importlib import resources
from pathlib import Path

from .errors import ModelSyntaxError, SpecSyntaxError
from .model import ParametricMDP, Specification, format_affine, parse_affine

_HEADER_RE = re.compile(r"^(parameters|states|initial)\s*:(.*)$")
_LABEL_RE = re.compile(r"^label\s+([A-Za-z_][\w\-]*)\s*:(.*)$")
_COST_RE = re.compile(r"^cost\s+(\S+)\s+(\S+)\s*:\s*(\S+)\s*$")
_STATE_RE = re.compile(r"^state\s+(\S+)\s*$")
_ACTION_RE = re.compile(r"^action\s+(\S+)\s*$")
_SUCC_RE = re.compile(r"^(\s*)(\d+)\s*:(.*)$")


def _int(text, line, col, what):
    try:
        return int(text)
    except ValueError:
        raise ModelSyntaxError(f"expected {what}, got {text!r}", line, col) from None


def parse_model(text: str) -> ParametricMDP:
    """Parse the explicit format; semantic checks are left to validate_model."""
    params = None
    num_states = None
    initial = None
    labels: dict[str, set] = {}
    raw_costs = []
    blocks: dict[int, list] = {}
    current_state = None
    current_action = None
    seen_magic = False

    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].rstrip()
        if not body.strip():
            continue
        stripped = body.strip()
        indent = len(body) - len(body.lstrip())
        col = indent + 1
        if not seen_magic:
            if stripped != "pmdp":
                raise ModelSyntaxError("file must start with 'pmdp'", lineno, col)
            seen_magic = True
            continue

        m = _SUCC_RE.match(body)
        if m:
            if current_action is None:
                raise ModelSyntaxError("transition outside an action block", lineno, col)
            succ = int(m.group(2))
            expr_col = len(body) - len(m.group(3)) + 1
            if params is None:
                raise ModelSyntaxError("'parameters:' must precede transitions", lineno, col)
            expr = parse_affine(m.group(3), params, line=lineno, col=expr_col)
            current_action[1].append((succ, expr))
            continue

        m = _HEADER_RE.match(stripped)
        if m:
            key, rest = m.group(1), m.group(2).strip()
            rest_col = col + len(stripped) - len(m.group(2).lstrip())
            if key == "parameters":
                if params is not None:
                    raise ModelSyntaxError("duplicate 'parameters:' line", lineno, col)
                params = tuple(rest.split())
                for p in params:
                    if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", p):
                        raise ModelSyntaxError(f"invalid parameter name {p!r}", lineno, rest_col)
                if len(set(params)) != len(params):
                    raise ModelSyntaxError("duplicate parameter name", lineno, rest_col)
            elif key == "states":
                num_states = _int(rest, lineno, rest_col, "a state count")
                if num_states <= 0:
                    raise ModelSyntaxError("state count must be positive", lineno, rest_col)
            else:
                initial = _int(rest, lineno, rest_col, "an initial state")
            continue

        m = _LABEL_RE.match(stripped)
        if m:
            labels.setdefault(m.group(1), set()).update(
                _int(tok, lineno, col, "a state id") for tok in m.group(2).replace(",", " ").split()
            )
            continue

        m = _COST_RE.match(stripped)
        if m:
            try:
                value = Fraction(m.group(3))
            except ValueError:
                raise ModelSyntaxError(f"invalid cost {m.group(3)!r}", lineno, col) from None
            raw_costs.append((_int(m.group(1), lineno, col, "a state id"), m.group(2), value, lineno, col))
            continue

        m = _STATE_RE.match(stripped)
        if m:
            s = _int(m.group(1), lineno, col, "a state id")
            if s in blocks:
                raise ModelSyntaxError(f"duplicate block for state {s}", lineno, col)
            blocks[s] = []
            current_state = s
            current_action = None
            continue

        m = _ACTION_RE.match(stripped)
        if m:
            if current_state is None:
                raise ModelSyntaxError("action outside a state block", lineno, col)
            name = m.group(1)
            if any(a == name for a, _ in blocks[current_state]):
                raise ModelSyntaxError(f"duplicate action {name!r}", lineno, col)
            current_action = (name, [])
            blocks[current_state].append(current_action)
            continue

        raise ModelSyntaxError(f"cannot parse {stripped!r}", lineno, col)

    if not seen_magic:
        raise ModelSyntaxError("empty model file", 1, 1)
    if params is None:
        raise ModelSyntaxError("missing 'parameters:' line")
    if num_states is None:
        raise ModelSyntaxError("missing 'states:' line")
    if initial is None:
        raise ModelSyntaxError("missing 'initial:' line")
    for s in blocks:
        if not 0 <= s < num_states:
            raise ModelSyntaxError(f"state {s} out of range 0..{num_states - 1}")

    actions = [tuple(a for a, _ in blocks.get(s, [])) for s in range(num_states)]
    rows = [tuple(tuple(r) for _, r in blocks.get(s, [])) for s in range(num_states)]
    costs = {}
    for s, name, value, lineno, col in raw_costs:
        if not 0 <= s < num_states or name not in actions[s]:
            raise ModelSyntaxError(f"cost refers to unknown choice ({s}, {name})", lineno, col)
        costs[(s, actions[s].index(name))] = value
    return ParametricMDP(num_states, initial, params, tuple(actions), tuple(rows), costs, labels)


def serialize_model(model: ParametricMDP) -> str:
    lines = ["pmdp", "parameters: " + " ".join(model.parameters), f"states: {model.num_states}", f"initial: {model.initial}"]
    for name, states in model.labels.items():
        lines.append(f"label {name}: " + " ".join(str(s) for s in sorted(states)))
    for (s, a), c in model.costs.items():
        lines.append(f"cost {s} {model.actions[s][a]}: {c}")
    for s in range(model.num_states):
        lines.append(f"state {s}")
        for a, row in enumerate(model.transitions[s]):
            lines.append(f"action {model.actions[s][a]}")
            for t, e in row:
                lines.append(f"  {t} : {format_affine(e)}")
    return "\n".join(lines) + "\n"


def load_model(path) -> ParametricMDP:
    return parse_model(Path(path).read_text())


def bundled_model_path(name: str = "fig2.pmdp") -> Path:
    """Path to a model file shipped with the package."""
    return Path(str(resources.files("pmdpsynth") / "data" / name))


_SPEC_RE = re.compile(
    r"^\s*(?P<kind>[PE])\s*(?P<dir><=|>=)\s*(?P<num>[0-9.eE+\-/]+)\s*\[\s*F\s+(?P<targets>[^\]]+?)\s*\]\s*$"
)


def parse_spec(text: str, labels=None, num_states: int | None = None) -> Specification:
    """``("P"|"E") ("<="|">=") number "[" "F" label-or-state-list "]"``."""
    m = _SPEC_RE.match(text)
    if m is None:
        raise SpecSyntaxError(f"cannot parse specification {text!r}")
    try:
        threshold = float(Fraction(m.group("num")))
    except (ValueError, ZeroDivisionError):
        raise SpecSyntaxError(f"invalid threshold {m.group('num')!r}") from None
    targets = set()
    for tok in m.group("targets").replace(",", " ").split():
        tok = tok.strip('"')
        if tok.isdigit():
            s = int(tok)
            if num_states is not None and not 0 <= s < num_states:
                raise SpecSyntaxError(f"state {s} out of range")
            targets.add(s)
        elif labels is not None and tok in labels:
            targets |= set(labels[tok])
        else:
            raise SpecSyntaxError(f"unknown label {tok!r}")
    kind = "reach" if m.group("kind") == "P" else "cost"
    try:
        return Specification(kind, frozenset(targets), threshold, m.group("dir"))
    except ValueError as exc:
        raise SpecSyntaxError(str(exc)) from None
