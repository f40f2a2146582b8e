"""Text formats: matrix literals, state files and state-family spec files.

Matrix literal::

    dim <d>
    <d lines of d whitespace-separated complex numbers re+imj>

State file: ``n=<int>`` and ``region=<comma list>`` header lines followed by
the matrix literal of the full ``2**n`` density.

Family spec file::

    regions I=<list> J=<list> n=<int>
    # separable mixture
    term w=<float>
    m1=<constructor>
    m2=<constructor>
    m3=<constructor>
    # or monomial terms
    Cplus=<monomial>
    term alpha=<float> A=<monomial> B=<monomial> K=<list>

Marginal constructors: ``tracial``, ``pure <monomial>``, ``random <seed>``,
``random-even <seed>`` and ``file <path>`` (a matrix literal, either the
compressed ``2**|region|`` matrix or the full ``2**n`` one; rescaled to
``tau = 1``).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from car_entropy.car_core import CarOperator, ModeSet, Monomial, StateDensity, parse_monomial, tau
from car_entropy.states import (
    MarginalTriple,
    MixtureSpec,
    MonomialTermSpec,
    MonomialSpecError,
    pure_state,
    random_faithful_state,
    tracial_state,
)
from car_entropy.subalgebra import RegionPair, embed, even_part, in_subalgebra

__all__ = [
    "SpecFormatError",
    "parse_int_list",
    "format_matrix",
    "parse_matrix",
    "read_matrix",
    "format_operator",
    "format_state",
    "write_state",
    "read_operator",
    "read_state",
    "FamilySpec",
    "parse_family_spec",
    "read_family_spec",
]


class SpecFormatError(ValueError):
    """Malformed state or spec file."""


def parse_int_list(text: str) -> list[int]:
    text = text.strip()
    if not text:
        return []
    try:
        return [int(tok) for tok in text.split(",")]
    except ValueError:
        raise SpecFormatError(f"expected a comma-separated integer list, got {text!r}") from None


def _format_complex(z: complex) -> str:
    return f"{z.real:.17g}{z.imag:+.17g}j"


def format_matrix(mat: np.ndarray) -> str:
    d = mat.shape[0]
    lines = [f"dim {d}"]
    lines += [" ".join(_format_complex(z) for z in row) for row in mat]
    return "\n".join(lines) + "\n"


def parse_matrix(lines: list[str]) -> np.ndarray:
    lines = [ln for ln in lines if ln.strip()]
    if not lines or not lines[0].startswith("dim "):
        raise SpecFormatError("matrix literal must start with 'dim <d>'")
    try:
        d = int(lines[0].split()[1])
    except (IndexError, ValueError):
        raise SpecFormatError(f"bad dimension line {lines[0]!r}") from None
    rows = lines[1:]
    if len(rows) != d:
        raise SpecFormatError(f"expected {d} matrix rows, got {len(rows)}")
    out = np.empty((d, d), dtype=complex)
    for r, row in enumerate(rows):
        toks = row.split()
        if len(toks) != d:
            raise SpecFormatError(f"row {r} has {len(toks)} entries, expected {d}")
        try:
            out[r] = [complex(t) for t in toks]
        except ValueError as exc:
            raise SpecFormatError(f"row {r}: {exc}") from None
    return out


def read_matrix(path: str | Path) -> np.ndarray:
    return parse_matrix(Path(path).read_text().splitlines())


def format_operator(X: CarOperator, region: ModeSet) -> str:
    return f"n={X.n}\nregion={region}\n" + format_matrix(X.matrix)


def format_state(D: StateDensity) -> str:
    return format_operator(D.op, D.region)


def write_state(path: str | Path, D: StateDensity) -> None:
    Path(path).write_text(format_state(D))


def read_operator(path: str | Path) -> tuple[CarOperator, ModeSet]:
    """Load an operator file (state-file layout) without density checks.

    Raises:
        SpecFormatError: malformed file, or the matrix is not in ``A(region)``.
    """
    lines = Path(path).read_text().splitlines()
    header = {}
    body_start = 0
    for body_start, ln in enumerate(lines):
        if ln.startswith("dim "):
            break
        if ln.strip():
            key, _, value = ln.partition("=")
            header[key.strip()] = value.strip()
    else:
        raise SpecFormatError("state file has no matrix literal")
    try:
        n = int(header["n"])
        region = ModeSet(parse_int_list(header.get("region", "")), n)
    except KeyError:
        raise SpecFormatError("state file needs an 'n=' header line") from None
    except ValueError as exc:
        raise SpecFormatError(str(exc)) from None
    mat = parse_matrix(lines[body_start:])
    if mat.shape[0] != 1 << n:
        raise SpecFormatError(f"matrix dimension {mat.shape[0]} does not match n={n}")
    op = CarOperator(mat, n)
    if not in_subalgebra(op, region):
        raise SpecFormatError(f"matrix is not an element of A({{{region}}})")
    return op, region


def read_state(path: str | Path) -> StateDensity:
    """Load and validate a state file.

    Raises:
        SpecFormatError: malformed file.
        InvalidStateError: the matrix is not a density in ``A(region)``.
    """
    op, region = read_operator(path)
    return StateDensity(op, region)


# ---------------------------------------------------------------------------
# Family spec files
# ---------------------------------------------------------------------------


@dataclass
class FamilySpec:
    regions: RegionPair
    kind: str  # "prop4" or "prop5"
    mixture: MixtureSpec | None = None
    terms: list[MonomialTermSpec] = field(default_factory=list)


_KEYVAL = re.compile(r"(\w+)=")


def _keyvals(text: str) -> dict[str, str]:
    """Split ``k1=v1 k2=v with spaces`` into a dict; values run to the next key."""
    marks = list(_KEYVAL.finditer(text))
    out = {}
    for m, nxt in zip(marks, marks[1:] + [None]):
        end = nxt.start() if nxt else len(text)
        out[m.group(1)] = text[m.end():end].strip()
    return out


def _marginal(spec: str, region: ModeSet, base: Path) -> StateDensity:
    word, _, arg = spec.strip().partition(" ")
    arg = arg.strip()
    try:
        if word == "tracial":
            return tracial_state(region)
        if word == "pure":
            return pure_state(parse_monomial(arg), region)
        if word == "random":
            return random_faithful_state(region, int(arg))
        if word == "random-even":
            D = random_faithful_state(region, int(arg))
            return StateDensity(even_part(D.op), region)
        if word == "file":
            mat = read_matrix(base / arg)
            if mat.shape[0] == 1 << len(region) and len(region) != region.ambient:
                op = embed(mat, region)
            else:
                op = CarOperator(mat, region.ambient)
            return StateDensity(op / tau(op).real, region)
    except SpecFormatError:
        raise
    except ValueError as exc:
        raise SpecFormatError(f"marginal {spec!r}: {exc}") from None
    raise SpecFormatError(f"unknown marginal constructor {spec!r}")


def parse_family_spec(text: str, base: str | Path = ".") -> FamilySpec:
    base = Path(base)
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines or not lines[0].startswith("regions"):
        raise SpecFormatError("spec must start with 'regions I=<list> J=<list> n=<int>'")
    head = _keyvals(lines[0][len("regions"):])
    try:
        n = int(head["n"])
        regions = RegionPair.from_lists(parse_int_list(head["I"]), parse_int_list(head["J"]), n)
    except KeyError as exc:
        raise SpecFormatError(f"regions line is missing {exc.args[0]}=") from None
    except ValueError as exc:
        raise SpecFormatError(str(exc)) from None

    body = lines[1:]
    if any(ln.startswith("term alpha=") for ln in body):
        return _parse_monomial(body, regions)
    return _parse_mixture(body, regions, base)


def _parse_mixture(body: list[str], regions: RegionPair, base: Path) -> FamilySpec:
    parts = (regions.I_minus_J, regions.intersection, regions.J_minus_I)
    weights, triples = [], []
    i = 0
    while i < len(body):
        ln = body[i]
        if not ln.startswith("term"):
            raise SpecFormatError(f"expected a 'term w=<float>' line, got {ln!r}")
        try:
            weights.append(float(_keyvals(ln[4:])["w"]))
        except (KeyError, ValueError):
            raise SpecFormatError(f"bad term line {ln!r}") from None
        margs = []
        for slot, R in enumerate(parts, start=1):
            i += 1
            if i >= len(body) or not body[i].startswith(f"m{slot}="):
                raise SpecFormatError(f"term {len(weights) - 1} is missing its m{slot}= line")
            margs.append(_marginal(body[i][3:], R, base))
        try:
            triples.append(MarginalTriple(*margs))
        except ValueError as exc:
            raise SpecFormatError(f"term {len(weights) - 1}: {exc}") from None
        i += 1
    if not triples:
        raise SpecFormatError("spec has no terms")
    try:
        mixture = MixtureSpec(tuple(weights), tuple(triples), regions)
    except ValueError as exc:
        raise SpecFormatError(str(exc)) from None
    return FamilySpec(regions, "prop4", mixture=mixture)


def _parse_monomial(body: list[str], regions: RegionPair) -> FamilySpec:
    n = regions.ambient
    c_plus_lines = [ln for ln in body if ln.startswith("Cplus=")]
    raw_terms = []
    for ln in body:
        if ln.startswith("Cplus="):
            continue
        if not ln.startswith("term"):
            raise SpecFormatError(f"unexpected line {ln!r}")
        raw_terms.append(_keyvals(ln[4:]))
    try:
        c_values = [parse_monomial(ln[len("Cplus="):]) for ln in c_plus_lines] or [Monomial()]
        terms = []
        for kv in raw_terms:
            c_plus = parse_monomial(kv["Cplus"]) if "Cplus" in kv else c_values[0]
            terms.append(
                MonomialTermSpec(
                    float(kv["alpha"]),
                    parse_monomial(kv.get("A", "")),
                    parse_monomial(kv.get("B", "")),
                    ModeSet(parse_int_list(kv.get("K", "")), n),
                    c_plus,
                )
            )
    except KeyError as exc:
        raise SpecFormatError(f"term line is missing {exc.args[0]}=") from None
    except ValueError as exc:
        raise SpecFormatError(str(exc)) from None
    if len(set(c_values)) > 1:
        raise MonomialSpecError(
            "C+ must be the same for every term (got "
            + ", ".join(str(c) or "1" for c in dict.fromkeys(c_values)) + ")"
        )
    if not terms:
        raise SpecFormatError("spec has no terms")
    return FamilySpec(regions, "prop5", terms=terms)


def read_family_spec(path: str | Path) -> FamilySpec:
    path = Path(path)
    return parse_family_spec(path.read_text(), path.parent)
