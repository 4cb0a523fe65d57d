"""Device-tree fixture parsing.

One node per line:

    node <label> compatible=<vendor,model> [reg=<hexbase>,<hexsize>] [sysfs=<relpath>]

'#' starts a comment, blank lines are skipped, node order is significant.
A node must carry reg= (memory-mapped window), sysfs= (attribute
directory), or both. Platform windows must not overlap.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import AmbiguousMatchError, OverlapError, ParseError


@dataclass(frozen=True)
class DeviceNode:
    label: str
    compatible: str
    reg_base: int | None = None
    reg_size: int | None = None
    sysfs: str | None = None

    @property
    def is_platform(self) -> bool:
        return self.reg_base is not None

    @property
    def is_sysfs(self) -> bool:
        return self.sysfs is not None


def _parse_int(text: str, where: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise ParseError(where, f"not an integer: {text!r}") from None
    if value < 0:
        raise ParseError(where, f"must be non-negative: {text!r}")
    return value


def parse_device_tree(text: str, origin: str = "<string>") -> list[DeviceNode]:
    """Parse fixture text into nodes, preserving order."""
    nodes: list[DeviceNode] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        where = f"{origin}:{lineno}"
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if tokens[0] != "node":
            raise ParseError(where, f"expected 'node', got {tokens[0]!r}")
        if len(tokens) < 2 or "=" in tokens[1]:
            raise ParseError(where, "node label missing")
        label = tokens[1]
        if label in seen:
            raise ParseError(where, f"duplicate node label {label!r}")
        seen.add(label)

        props: dict[str, str] = {}
        for token in tokens[2:]:
            key, sep, value = token.partition("=")
            if not sep or not value:
                raise ParseError(where, f"malformed property {token!r}")
            if key in props:
                raise ParseError(where, f"duplicate property {key!r}")
            props[key] = value

        unknown = set(props) - {"compatible", "reg", "sysfs"}
        if unknown:
            raise ParseError(where, f"unknown property {sorted(unknown)[0]!r}")
        if "compatible" not in props:
            raise ParseError(where, "node needs a compatible= property")

        reg_base = reg_size = None
        if "reg" in props:
            parts = props["reg"].split(",")
            if len(parts) != 2:
                raise ParseError(where, "reg must be <base>,<size>")
            reg_base = _parse_int(parts[0], where)
            reg_size = _parse_int(parts[1], where)
            if reg_size == 0:
                raise ParseError(where, "reg size must be non-zero")
        if "reg" not in props and "sysfs" not in props:
            raise ParseError(where, "node needs reg= or sysfs=")

        nodes.append(DeviceNode(
            label=label,
            compatible=props["compatible"],
            reg_base=reg_base,
            reg_size=reg_size,
            sysfs=props.get("sysfs"),
        ))

    _check_overlaps(nodes)
    return nodes


def _check_overlaps(nodes: list[DeviceNode]) -> None:
    platform = [n for n in nodes if n.is_platform]
    for i, a in enumerate(platform):
        for b in platform[i + 1:]:
            if a.reg_base < b.reg_base + b.reg_size and \
                    b.reg_base < a.reg_base + a.reg_size:
                raise OverlapError(
                    f"nodes {a.label!r} and {b.label!r} have overlapping "
                    f"register windows")


def parse_device_tree_file(path: str | Path) -> list[DeviceNode]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"device tree file not found: {path}")
    return parse_device_tree(path.read_text(), origin=str(path))


def match_sysfs(node: DeviceNode, sysfs_root: str | Path) -> Path | None:
    """Find the driver attribute directory for a node by its label.

    Scans sysfs_root for directories named exactly like the node label.
    Returns the single match, None when no driver is bound, and raises
    when the label is ambiguous.
    """
    root = Path(sysfs_root)
    if not root.is_dir():
        raise FileNotFoundError(f"sysfs root does not exist: {root}")
    matches = sorted(p for p in root.rglob(node.label) if p.is_dir())
    if not matches:
        return None
    if len(matches) > 1:
        raise AmbiguousMatchError(
            f"label {node.label!r} matches {len(matches)} directories under "
            f"{root}: {', '.join(str(m) for m in matches)}")
    return matches[0]
