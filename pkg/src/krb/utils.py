"""Parsing of scalar expressions, inclusive ranges and parameter grids.

Grids are written as a product of axes, e.g. ``(0.4:0.4:2)x(0:2pi/5:2pi)`` or
``(1:1:3)^4``. An axis is an inclusive range ``start:step:stop``, a comma list
``1,2,4`` or a single value. Scalars accept ``pi`` with an optional factor and
divisor: ``pi``, ``2pi``, ``2*pi/5``, ``-pi/2``.
"""

import itertools
import math
import re

from krb.exceptions import ConfigError

_SCALAR = re.compile(
    r"^(?P<factor>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)?\s*\*?\s*(?P<pi>pi|π)?"
    r"\s*(?:/\s*(?P<div>\d+\.?\d*))?$",
)


def parse_scalar(text: str) -> float:
    """Parse a number, optionally multiplied by ``pi`` and divided by a constant.

    Args:
        text (str): The expression, e.g. ``"0.4"``, ``"2pi/5"`` or ``"-pi"``.

    Returns:
        float: The value.

    Raises:
        ConfigError: If the expression is not of that form.
    """
    s = text.strip()
    negate = False
    if s.startswith("-") and s[1:].lstrip().startswith(("pi", "π")):
        negate, s = True, s[1:].lstrip()
    match = _SCALAR.match(s)
    if not s or match is None or (match["factor"] is None and match["pi"] is None):
        raise ConfigError(f"cannot parse number {text!r}")
    value = float(match["factor"]) if match["factor"] is not None else 1.0
    if match["pi"]:
        value *= math.pi
    if match["div"]:
        divisor = float(match["div"])
        if divisor == 0.0:
            raise ConfigError(f"division by zero in {text!r}")
        value /= divisor
    return -value if negate else value


def parse_range(text: str) -> list[float]:
    """Values of the inclusive range ``start:step:stop``.

    ``stop`` is included when it lies within ``1e-10 * step`` of a grid
    value, so ``0:2pi/5:2pi`` has six points.
    """
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"a range needs start:step:stop, got {text!r}")
    start, step, stop = (parse_scalar(p) for p in parts)
    if step <= 0.0:
        raise ConfigError(f"range step must be positive, got {text!r}")
    if stop < start:
        return []
    count = math.floor((stop - start) / step + 1e-10) + 1
    values = [start + i * step for i in range(count)]
    # land exactly on the endpoint when it is a grid value
    if abs(values[-1] - stop) <= 1e-10 * step:
        values[-1] = stop
    return values


def parse_axis(text: str) -> list[float]:
    """Values of one grid axis: a range, a parenthesized list or a single number."""
    s = text.strip()
    if s.startswith("(") and s.endswith(")"):
        s = s[1:-1].strip()
    if not s:
        return []
    if ":" in s:
        return parse_range(s)
    return [parse_scalar(v) for v in s.split(",")]


def _split_axes(text: str) -> list[str]:
    """Split at the ``x`` product signs that sit outside parentheses."""
    axes: list[str] = []
    depth = 0
    current = ""
    for char in text:
        if char == "(":
            depth += 1
        elif char == ")":
            depth -= 1
        if depth == 0 and char in "x×" and current.strip().endswith((")", "]")):
            axes.append(current)
            current = ""
            continue
        current += char
    axes.append(current)
    return axes


def parse_grid(text: str) -> list[tuple[float, ...]]:
    """Parameter points of a grid specification in lexicographic order.

    The first coordinate varies slowest. ``(axis)^d`` repeats an axis ``d``
    times.

    Raises:
        ConfigError: If the specification cannot be parsed.
    """
    axes: list[list[float]] = []
    for chunk in _split_axes(text.strip()):
        chunk = chunk.strip()
        power = 1
        if "^" in chunk:
            chunk, _, exponent = chunk.rpartition("^")
            try:
                power = int(exponent)
            except ValueError as e:
                raise ConfigError(f"bad exponent {exponent!r} in {text!r}") from e
            if power < 1:
                raise ConfigError(f"exponent must be positive in {text!r}")
        axes.extend([parse_axis(chunk)] * power)
    return lexicographic_grid(axes)


def lexicographic_grid(axes: list[list[float]]) -> list[tuple[float, ...]]:
    """Cartesian product of ``axes`` with the first axis varying slowest."""
    return list(itertools.product(*axes))
