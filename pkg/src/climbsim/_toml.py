import re

import tomli


class TomlError(ValueError):
    pass


def parse(text: str) -> dict:
    """tomli.loads with duplicate keys reported by name."""
    try:
        return tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        msg = str(exc)
        m = re.search(r"at line (\d+)", msg)
        if "overwrite" in msg and m:
            line = text.splitlines()[int(m.group(1)) - 1]
            key = line.split("=", 1)[0].strip().strip("[]").strip()
            raise TomlError(f"parse failure: duplicate key {key!r} (line {m.group(1)})") from exc
        raise TomlError(f"parse failure: {msg}") from exc
