"""Answer normalization and equivalence over a LaTeX math-fragment grammar.

All numeric comparison is exact rational arithmetic; decimals parse to exact
fractions, so there is no tolerance to tune. Symbolic forms (pi multiples,
square roots, degrees) canonicalize to tagged coefficient strings. Anything
the grammar does not recognize falls back to case-folded text, and two
symbolic forms that differ after canonicalization grade conservatively false;
see KNOWN_GAPS.md for the equivalences this deliberately leaves unhandled.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction


class Kind(str, Enum):
    RATIONAL = "rational"
    DECIMAL = "decimal"
    SYMBOLIC = "symbolic"
    TUPLE = "tuple"
    INTERVAL = "interval"
    TEXT = "text"


_NUMERIC_KINDS = frozenset({Kind.RATIONAL, Kind.DECIMAL})


@dataclass(frozen=True)
class CanonicalAnswer:
    kind: Kind
    value: Fraction | None = None
    parts: tuple["CanonicalAnswer", ...] | None = None
    normalized_text: str | None = None


_MATH_DELIMS = (("$$", "$$"), ("\\(", "\\)"), ("\\[", "\\]"), ("$", "$"))
_SPACING_TOKENS = ("\\left", "\\right", "\\!", "\\,", "\\;", "\\:", "\\quad", "\\qquad", "\\ ", "~")

_INT = re.compile(r"^[+-]?\d+$")
_COMMA_INT = re.compile(r"^[+-]?\d{1,3}(?:,\d{3})+$")
_FRAC_LATEX = re.compile(r"^([+-]?)\\frac\{([+-]?\d+)\}\{([+-]?\d+)\}$")
_FRAC_SLASH = re.compile(r"^([+-]?\d+)/(\d+)$")
_DECIMAL = re.compile(r"^[+-]?\d*\.\d+$")

_PI = r"(?:\\pi|π)"
_SQRT = r"(?:\\sqrt|√)"
_PI_SIMPLE = re.compile(rf"^([+-])?(\d+/\d+|\d*\.\d+|\d+)?\*?{_PI}(?:/(\d+))?$")
_PI_FRAC = re.compile(rf"^([+-])?\\frac\{{(\d+)?{_PI}\}}\{{(\d+)\}}$")
_SQRT_SIMPLE = re.compile(rf"^([+-])?(\d+/\d+|\d+)?{_SQRT}(?:\{{(\d+)\}}|(\d+))(?:/(\d+))?$")
_SQRT_FRAC = re.compile(rf"^([+-])?\\frac\{{(\d+)?{_SQRT}(?:\{{(\d+)\}}|(\d+))\}}\{{(\d+)\}}$")
_DEGREE = re.compile(r"^([+-]?(?:\d+/\d+|\d*\.\d+|\d+))(?:\^\{?\\circ\}?|°)$")


def _strip_wrappers(raw: str) -> str:
    s = raw.strip()
    changed = True
    while changed:
        changed = False
        s = s.strip()
        for opener, closer in _MATH_DELIMS:
            if (
                s.startswith(opener)
                and s.endswith(closer)
                and len(s) >= len(opener) + len(closer) + 1
            ):
                s = s[len(opener) : len(s) - len(closer)]
                changed = True
                break
    return s


def _clean(s: str) -> str:
    """Drop spacing commands and cosmetic wrappers, keeping word spacing."""
    for token in _SPACING_TOKENS:
        s = s.replace(token, "")
    for variant in ("\\dfrac", "\\tfrac", "\\cfrac"):
        s = s.replace(variant, "\\frac")
    return re.sub(r"\\text\{([^{}]*)\}", r"\1", s)


def _compact(s: str) -> str:
    return re.sub(r"\s+", "", _clean(s))


def _normalize_text(s: str) -> str:
    return " ".join(s.split()).lower()


def _sign(token: str | None) -> int:
    return -1 if token == "-" else 1


def _coefficient(token: str | None) -> Fraction:
    if token is None or token == "":
        return Fraction(1)
    return Fraction(token)


def _symbolic(coefficient: Fraction, tag: str) -> CanonicalAnswer:
    if coefficient == 0:
        return CanonicalAnswer(Kind.RATIONAL, value=Fraction(0))
    return CanonicalAnswer(Kind.SYMBOLIC, normalized_text=f"{coefficient}|{tag}")


def _parse_integer(compact: str) -> CanonicalAnswer | None:
    if _INT.match(compact):
        return CanonicalAnswer(Kind.RATIONAL, value=Fraction(int(compact)))
    if _COMMA_INT.match(compact):
        return CanonicalAnswer(Kind.RATIONAL, value=Fraction(int(compact.replace(",", ""))))
    return None


def _parse_fraction(compact: str) -> CanonicalAnswer | None:
    match = _FRAC_LATEX.match(compact)
    if match:
        sign, num, den = match.groups()
        if int(den) == 0:
            return None
        return CanonicalAnswer(
            Kind.RATIONAL, value=_sign(sign or None) * Fraction(int(num), int(den))
        )
    match = _FRAC_SLASH.match(compact)
    if match:
        num, den = match.groups()
        if int(den) == 0:
            return None
        return CanonicalAnswer(Kind.RATIONAL, value=Fraction(int(num), int(den)))
    return None


def _parse_decimal(compact: str) -> CanonicalAnswer | None:
    if _DECIMAL.match(compact):
        return CanonicalAnswer(Kind.DECIMAL, value=Fraction(compact))
    return None


def _parse_symbolic(compact: str) -> CanonicalAnswer | None:
    match = _PI_SIMPLE.match(compact)
    if match:
        sign, coef, den = match.groups()
        value = _sign(sign) * _coefficient(coef) / int(den or 1)
        return _symbolic(value, "pi")
    match = _PI_FRAC.match(compact)
    if match:
        sign, num, den = match.groups()
        value = _sign(sign) * _coefficient(num) / int(den)
        return _symbolic(value, "pi")
    match = _DEGREE.match(compact)
    if match:
        return _symbolic(Fraction(match.group(1)), "deg")
    match = _SQRT_SIMPLE.match(compact)
    if match:
        sign, coef, rad_braced, rad_bare, den = match.groups()
        radicand = int(rad_braced or rad_bare)
        value = _sign(sign) * _coefficient(coef) / int(den or 1)
        return _radical(value, radicand)
    match = _SQRT_FRAC.match(compact)
    if match:
        sign, coef, rad_braced, rad_bare, den = match.groups()
        radicand = int(rad_braced or rad_bare)
        value = _sign(sign) * _coefficient(coef) / int(den)
        return _radical(value, radicand)
    return None


def _radical(coefficient: Fraction, radicand: int) -> CanonicalAnswer:
    # sqrt{0}/sqrt{1} collapse to rationals; larger square factors are NOT
    # extracted (conservative; see KNOWN_GAPS.md).
    if radicand == 0:
        return CanonicalAnswer(Kind.RATIONAL, value=Fraction(0))
    if radicand == 1:
        return CanonicalAnswer(Kind.RATIONAL, value=coefficient)
    return _symbolic(coefficient, f"sqrt{radicand}")


def _split_top_level(inner: str) -> list[str]:
    parts: list[str] = []
    depth = 0
    current: list[str] = []
    for ch in inner:
        if ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(current))
            current = []
        else:
            current.append(ch)
    parts.append("".join(current))
    return parts


def _parse_sequence(compact: str) -> CanonicalAnswer | None:
    if len(compact) < 3 or compact[0] not in "([" or compact[-1] not in ")]":
        return None
    inner = compact[1:-1]
    pieces = _split_top_level(inner)
    if any(not piece for piece in pieces):
        return None
    if len(pieces) == 1:
        if compact[0] == "(" and compact[-1] == ")":
            return _normalize_compact(inner)  # parenthesized scalar
        return None
    parts = tuple(_normalize_compact(piece) for piece in pieces)
    if compact[0] == "(" and compact[-1] == ")":
        return CanonicalAnswer(Kind.TUPLE, parts=parts)
    return CanonicalAnswer(Kind.INTERVAL, parts=parts, normalized_text=compact[0] + compact[-1])


def _parse_percent(compact: str) -> CanonicalAnswer | None:
    # Grading practice treats "40%" and "40" as the same answer: the percent
    # sign is presentation, so it is stripped rather than divided through.
    if compact.endswith("\\%"):
        body = compact[:-2]
    elif compact.endswith("%"):
        body = compact[:-1]
    else:
        return None
    for parser in (_parse_integer, _parse_fraction, _parse_decimal):
        out = parser(body)
        if out is not None:
            return out
    return None


_PARSERS = (
    _parse_integer,
    _parse_fraction,
    _parse_decimal,
    _parse_symbolic,
    _parse_sequence,
    _parse_percent,
)


def _normalize_compact(compact: str) -> CanonicalAnswer:
    for parser in _PARSERS:
        out = parser(compact)
        if out is not None:
            return out
    return CanonicalAnswer(Kind.TEXT, normalized_text=compact.lower())


def normalize(raw: str) -> CanonicalAnswer:
    """Parse a raw answer string into its canonical form.

    Parse order: integer, fraction, decimal, symbolic (pi/degree/sqrt),
    parenthesized tuple or interval, percentage; anything else is text.
    """
    if not raw or not raw.strip():
        raise ValueError("raw answer must be non-empty")
    cleaned = _clean(_strip_wrappers(raw))
    result = _normalize_compact(re.sub(r"\s+", "", cleaned))
    if result.kind is Kind.TEXT:
        return CanonicalAnswer(Kind.TEXT, normalized_text=_normalize_text(cleaned))
    return result


def render(canonical: CanonicalAnswer) -> str:
    """Render a canonical answer back to a parseable string (for round-trips)."""
    if canonical.kind is Kind.RATIONAL:
        return str(canonical.value)
    if canonical.kind is Kind.DECIMAL:
        return _decimal_string(canonical.value)
    if canonical.kind is Kind.SYMBOLIC:
        coefficient, tag = canonical.normalized_text.split("|", 1)
        if tag == "pi":
            return _with_coefficient(coefficient, "\\pi")
        if tag == "deg":
            return f"{coefficient}^\\circ"
        radicand = tag[len("sqrt") :]
        return _with_coefficient(coefficient, f"\\sqrt{{{radicand}}}")
    if canonical.kind is Kind.TUPLE:
        return "(" + ", ".join(render(part) for part in canonical.parts) + ")"
    if canonical.kind is Kind.INTERVAL:
        opener, closer = canonical.normalized_text
        return opener + ", ".join(render(part) for part in canonical.parts) + closer
    return canonical.normalized_text


def _with_coefficient(coefficient: str, symbol: str) -> str:
    if coefficient == "1":
        return symbol
    if coefficient == "-1":
        return f"-{symbol}"
    return f"{coefficient}{symbol}"


def _decimal_string(value: Fraction) -> str:
    # DECIMAL values always terminate (they were parsed from finite decimals).
    sign = "-" if value < 0 else ""
    magnitude = abs(value)
    denominator = magnitude.denominator
    shift = 0
    while denominator % 2 == 0:
        denominator //= 2
        shift += 1
    twos = shift
    while denominator % 5 == 0:
        denominator //= 5
        shift += 1
    if denominator != 1:
        return str(value)
    places = max(twos, shift - twos)
    scaled = magnitude * 10**places
    digits = str(int(scaled)).rjust(places + 1, "0")
    if places == 0:
        return f"{sign}{digits}.0"
    return f"{sign}{digits[:-places]}.{digits[-places:]}"


def equivalent(a: str, b: str, *, degree_radian_coercion: bool = False) -> bool:
    """Decide whether two raw answer strings denote the same answer.

    Numbers compare by exact rational value regardless of rendering (fraction,
    decimal, integer); tuples and intervals compare element-wise; symbolic
    forms compare by canonical text; everything else compares as case-folded,
    whitespace-collapsed text. ``degree_radian_coercion`` additionally treats
    x degrees and (x/180) pi as equal (off by default).
    """
    try:
        ca = normalize(a)
        cb = normalize(b)
    except ValueError:
        return False
    return _equal(ca, cb, degree_radian_coercion)


def _equal(x: CanonicalAnswer, y: CanonicalAnswer, coerce: bool) -> bool:
    if x.kind in _NUMERIC_KINDS and y.kind in _NUMERIC_KINDS:
        return x.value == y.value
    if x.kind is Kind.TUPLE and y.kind is Kind.TUPLE:
        return len(x.parts) == len(y.parts) and all(
            _equal(p, q, coerce) for p, q in zip(x.parts, y.parts)
        )
    if x.kind is Kind.INTERVAL and y.kind is Kind.INTERVAL:
        return (
            x.normalized_text == y.normalized_text
            and len(x.parts) == len(y.parts)
            and all(_equal(p, q, coerce) for p, q in zip(x.parts, y.parts))
        )
    if x.kind is Kind.SYMBOLIC and y.kind is Kind.SYMBOLIC:
        if x.normalized_text == y.normalized_text:
            return True
        if coerce:
            return _degree_pi_equal(x, y) or _degree_pi_equal(y, x)
        return False
    if x.kind is Kind.TEXT and y.kind is Kind.TEXT:
        return x.normalized_text == y.normalized_text
    return False


def _degree_pi_equal(deg: CanonicalAnswer, pi: CanonicalAnswer) -> bool:
    deg_coef, deg_tag = deg.normalized_text.split("|", 1)
    pi_coef, pi_tag = pi.normalized_text.split("|", 1)
    if deg_tag != "deg" or pi_tag != "pi":
        return False
    return Fraction(deg_coef) / 180 == Fraction(pi_coef)


def grade_sample(extracted, gold: str, *, degree_radian_coercion: bool = False) -> bool:
    """True iff the extracted boxed answer matches the gold answer.

    A sample with no extracted answer grades false rather than erroring.
    """
    if extracted is None:
        return False
    raw = getattr(extracted, "raw_boxed", extracted)
    if not raw or not str(raw).strip():
        return False
    return equivalent(str(raw), gold, degree_radian_coercion=degree_radian_coercion)
