"""Line-oriented text format shared by codebook and network files.

Each line is ``key token token ...``.  The first two lines are always
``format <kind>`` and ``format_version <n>``.  Keys may repeat (one line per
matrix row); lines starting with ``#`` are comments.  Floats are written
with ``repr`` so a write/read round trip is bit-exact.
"""

from __future__ import annotations

import os
from collections import defaultdict

FORMAT_VERSION = 1


class FormatError(ValueError):
    pass


def fmt(x) -> str:
    if x is None:
        return "none"
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, int):
        return str(x)
    return repr(float(x))


def write(path, kind: str, lines: list[tuple[str, list]]) -> None:
    """Write ``lines`` (key, values) after the format header, atomically."""
    out = [f"format {kind}", f"format_version {FORMAT_VERSION}"]
    for key, values in lines:
        if " " in key:
            raise ValueError(f"bad key {key!r}")
        out.append(" ".join([key, *(fmt(v) for v in values)]).rstrip())
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")
    os.replace(tmp, path)


def read(path, kind: str) -> dict[str, list[list[str]]]:
    """Parse a file into ``key -> list of token rows`` (in file order)."""
    entries: dict[str, list[list[str]]] = defaultdict(list)
    with open(path, encoding="ascii") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, *tokens = line.split()
            entries[key].append(tokens)
    if entries.get("format") != [[kind]]:
        raise FormatError(f"{path}: not a {kind} file")
    version = int(entries["format_version"][0][0])
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format_version {version}")
    return dict(entries)


def scalar(entries, key: str, conv=float):
    try:
        (tokens,) = entries[key]
        (tok,) = tokens
    except (KeyError, ValueError):
        raise FormatError(f"missing or malformed field {key!r}") from None
    if tok == "none":
        return None
    return conv(tok)


def floats(tokens) -> list[float]:
    return [float(t) for t in tokens]
