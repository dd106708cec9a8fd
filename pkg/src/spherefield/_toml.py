"""Minimal TOML-subset reader for configuration files.

The interpreter running this package (3.10) predates ``tomllib`` and no TOML
package is available, so this module parses the small subset the documented
config schema uses:

* comments (``#`` to end of line, outside strings),
* ``[section]`` headers (one level of nesting),
* ``key = value`` with value one of: basic double-quoted string, integer,
  float (including ``inf``/``nan`` forms), boolean, or a flat array of those.

Anything else raises :class:`TomlError` with the offending line number.
"""

from __future__ import annotations


class TomlError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _strip_comment(text: str, lineno: int) -> str:
    out = []
    in_string = False
    for ch in text:
        if ch == '"':
            in_string = not in_string
        if ch == "#" and not in_string:
            break
        out.append(ch)
    if in_string:
        raise TomlError("unterminated string", lineno)
    return "".join(out).strip()


def _parse_scalar(token: str, lineno: int):
    token = token.strip()
    if not token:
        raise TomlError("empty value", lineno)
    if token.startswith('"'):
        if not token.endswith('"') or len(token) < 2:
            raise TomlError("unterminated string", lineno)
        return token[1:-1]
    if token == "true":
        return True
    if token == "false":
        return False
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        raise TomlError(f"cannot parse value {token!r}", lineno) from None


def _split_items(body: str, lineno: int) -> list:
    items, depth, start = [], 0, 0
    in_string = False
    for i, ch in enumerate(body):
        if ch == '"':
            in_string = not in_string
        elif not in_string:
            if ch == "[":
                depth += 1
            elif ch == "]":
                depth -= 1
            elif ch == "," and depth == 0:
                items.append(body[start:i])
                start = i + 1
    last = body[start:].strip()
    if last:
        items.append(last)
    return items


def _parse_value(token: str, lineno: int):
    token = token.strip()
    if token.startswith("["):
        if not token.endswith("]"):
            raise TomlError("unterminated array", lineno)
        body = token[1:-1].strip()
        if not body:
            return []
        return [_parse_value(item, lineno) for item in _split_items(body, lineno)]
    return _parse_scalar(token, lineno)


def loads(text: str) -> dict:
    root: dict = {}
    table = root
    pending_key = None
    pending_value = ""
    pending_line = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw, lineno)
        if pending_key is not None:
            pending_value += " " + line
            if pending_value.count("[") == pending_value.count("]"):
                table[pending_key] = _parse_value(pending_value, pending_line)
                pending_key = None
            continue
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise TomlError("malformed section header", lineno)
            name = line[1:-1].strip()
            if not name or "[" in name or "]" in name:
                raise TomlError("malformed section header", lineno)
            table = root.setdefault(name, {})
            if not isinstance(table, dict):
                raise TomlError(f"section {name!r} collides with a key", lineno)
            continue
        if "=" not in line:
            raise TomlError("expected 'key = value'", lineno)
        key, _, value = line.partition("=")
        key = key.strip().strip('"')
        if not key:
            raise TomlError("empty key", lineno)
        value = value.strip()
        # multi-line arrays: defer until brackets balance
        if value.count("[") != value.count("]"):
            pending_key, pending_value, pending_line = key, value, lineno
            continue
        table[key] = _parse_value(value, lineno)
    if pending_key is not None:
        raise TomlError("unterminated array", pending_line)
    return root


def load(path) -> dict:
    with open(path) as fh:
        return loads(fh.read())
