"""Experiment configuration files.

A config is an INI file read with configparser.  Keys are case sensitive, since
``a`` and ``A`` are different letters.  Layout::

    [experiment]
    kind = width            # distance | fold | flare | width | pl-ball | lift | quasiconvexity | hyperbolicity
    rank = 3
    seed = 0
    cap = 5000000
    name = phi

    [t1]                    # images of the generators under t_1, one line each
    a = b
    b = c
    c = ab

    [t1.inverse]            # optional; checked against [t1] when present
    a = cA
    b = a
    c = b

    [width]                 # parameters of the chosen kind
    classes = a, b, ab
    N = 2 4 6 8

Lists are separated by commas or whitespace.  Graph fields accept ``rose``,
``random``, ``same`` (for H: a copy of G), ``act t1`` (for H: t1 applied to G)
or a path to a MarkedGraph text file relative to the config.
"""
from __future__ import annotations

import configparser
import re
import string
from dataclasses import dataclass, field
from pathlib import Path

from .free_group import Automorphism, AutomorphismError, format_word, parse_word
from .free_group.automorphism import substitute
from .free_group.words import WordError

KINDS = ("distance", "fold", "flare", "width", "pl-ball", "lift", "quasiconvexity", "hyperbolicity")

# default parameters per kind; values are raw strings, parsed on access
DEFAULTS = {
    "distance": {"G": "random", "H": "random", "pairs": "5"},
    "fold": {"G": "random", "H": "random", "dt": "0.015625", "classes": "a, b, ab"},
    "flare": {"classes": "a", "N": "6", "k": "0"},
    "width": {"classes": "a, b, ab", "N": "2 4 6 8", "width_bound": "1"},
    "pl-ball": {"L": "3", "orbit_class": "a", "n_max": "10"},
    "lift": {"subgroup": "a, b, cc, cAC, cBC", "pairs": "5"},
    "quasiconvexity": {"subgroup": "ab, cac", "N": "2 3 4", "pairs": "4"},
    "hyperbolicity": {"radius": "3", "budget": "64", "samples": "200000"},
}


class ConfigError(ValueError):
    """Invalid configuration, located by line and column when possible."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None, path: str = "<config>"):
        self.message, self.line, self.col, self.path = message, line, col, path
        where = path if line is None else f"{path}:{line}:{col or 1}"
        super().__init__(f"{where}: {message}")


@dataclass
class ExperimentConfig:
    kind: str
    rank: int
    seed: int
    cap: int
    name: str
    automorphisms: list          # (name, Automorphism)
    params: dict                 # raw strings for the kind's section
    path: str = "<config>"
    base_dir: Path = field(default_factory=Path.cwd)
    text: str = ""
    inverse_given: list = field(default_factory=list)

    # --- typed parameter access ------------------------------------------------------

    def _locate(self, key: str):
        return _find_key(self.text, self.kind, key)

    def _error(self, key, msg, offset=0):
        line, col = self._locate(key)
        raise ConfigError(msg, line, None if col is None else col + offset, self.path)

    def get_int(self, key: str) -> int:
        try:
            return int(self.params[key])
        except ValueError:
            self._error(key, f"{key} must be an integer, got {self.params[key]!r}")

    def get_float(self, key: str) -> float:
        try:
            return float(self.params[key])
        except ValueError:
            self._error(key, f"{key} must be a number, got {self.params[key]!r}")

    def get_ints(self, key: str) -> list:
        try:
            return [int(x) for x in _split(self.params[key])]
        except ValueError:
            self._error(key, f"{key} must be a list of integers, got {self.params[key]!r}")

    def get_words(self, key: str) -> list:
        raw = self.params[key]
        out = []
        for item in _split(raw):
            try:
                out.append(parse_word(item, self.rank))
            except WordError:
                bad = _first_bad_char(item, self.rank)
                self._error(key, f"bad word {item!r} in {key}: {bad[1]}", raw.index(item) + bad[0])
        return out

    def get_str(self, key: str) -> str:
        return self.params[key].strip()

    def to_text(self) -> str:
        lines = ["[experiment]", f"kind = {self.kind}", f"rank = {self.rank}", f"seed = {self.seed}",
                 f"cap = {self.cap}", f"name = {self.name}"]
        for name, phi in self.automorphisms:
            lines += ["", f"[{name}]"]
            lines += [f"{format_word((i + 1,))} = {format_word(w) or '1'}" for i, w in enumerate(phi.images)]
            if name in self.inverse_given:
                lines += ["", f"[{name}.inverse]"]
                lines += [f"{format_word((i + 1,))} = {format_word(w) or '1'}"
                          for i, w in enumerate(phi.inverse_images)]
        lines += ["", f"[{self.kind}]"]
        lines += [f"{k} = {v}" for k, v in self.params.items()]
        return "\n".join(lines) + "\n"


def _split(s: str) -> list:
    return [x for x in re.split(r"[,\s]+", s.strip()) if x]


def _first_bad_char(item: str, rank: int):
    for pos, ch in enumerate(item):
        if ch in string.ascii_lowercase and ord(ch) - ord("a") < rank:
            continue
        if ch in string.ascii_uppercase and ord(ch) - ord("A") < rank:
            continue
        if ch in string.ascii_letters:
            return pos, f"generator {ch!r} exceeds rank {rank}"
        return pos, f"unexpected character {ch!r}"
    return 0, "malformed word"


def _find_key(text: str, section: str, key: str):
    """(line, column of the value) of key in section, or (None, None)."""
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
            continue
        if current != section:
            continue
        m = re.match(r"\s*([^=:#;\s]+)\s*[=:]\s*", raw)
        if m and m.group(1) == key:
            return lineno, m.end() + 1
    return None, None


def _parser() -> configparser.ConfigParser:
    p = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None,
                                  default_section="__defaults__")
    p.optionxform = str
    return p


def _load_automorphism(cp, text, name, rank, path, section):
    images = {}
    for key, value in cp[section].items():
        line, col = _find_key(text, section, key)
        try:
            g = parse_word(key, rank)
        except WordError:
            raise ConfigError(f"[{section}] unknown generator {key!r}", line, 1, path) from None
        if len(g) != 1 or g[0] < 0:
            raise ConfigError(f"[{section}] left side must be a generator, got {key!r}", line, 1, path)
        try:
            images[g[0]] = parse_word(value, rank)
        except WordError:
            pos, msg = _first_bad_char(value.strip(), rank)
            raise ConfigError(f"[{section}] {msg}", line, col + pos, path) from None
    missing = [format_word((i,)) for i in range(1, rank + 1) if i not in images]
    if missing:
        raise ConfigError(f"[{section}] missing images for {', '.join(missing)}", None, None, path)
    return [images[i] for i in range(1, rank + 1)]


def parse_config(text: str, path: str = "<config>", base_dir: Path | None = None) -> ExperimentConfig:
    cp = _parser()
    try:
        cp.read_string(text, source=path)
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigError(f"cannot parse line {line.strip()}", lineno, 1, path) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", exc.lineno, 1, path) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r} in [{exc.section}]", exc.lineno, 1, path) from None
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], getattr(exc, "lineno", None), 1, path) from None
    if "experiment" not in cp:
        raise ConfigError("missing [experiment] section", None, None, path)
    ex = cp["experiment"]

    def num(key, default):
        raw = ex.get(key, str(default))
        try:
            return int(raw)
        except ValueError:
            line, col = _find_key(text, "experiment", key)
            raise ConfigError(f"{key} must be an integer, got {raw!r}", line, col, path) from None

    kind = ex.get("kind", "").strip()
    if kind not in KINDS:
        line, col = _find_key(text, "experiment", "kind")
        raise ConfigError(f"unknown experiment kind {kind!r}; expected one of {', '.join(KINDS)}", line, col, path)
    rank = num("rank", 3)
    if not 2 <= rank <= 26:
        line, col = _find_key(text, "experiment", "rank")
        raise ConfigError("rank must be between 2 and 26", line, col, path)
    seed, cap = num("seed", 0), num("cap", 5_000_000)
    if seed < 0 or seed >= 2 ** 64:
        raise ConfigError("seed must be an unsigned 64-bit integer", *_find_key(text, "experiment", "seed"), path)
    name = ex.get("name", Path(path).stem if path != "<config>" else kind).strip()

    autos, inverse_given = [], []
    j = 1
    while f"t{j}" in cp:
        sec = f"t{j}"
        imgs = _load_automorphism(cp, text, sec, rank, path, sec)
        try:
            if f"{sec}.inverse" in cp:
                inv = _load_automorphism(cp, text, sec, rank, path, f"{sec}.inverse")
                for i, w in enumerate(inv):
                    back = substitute(imgs, w)
                    if back != (i + 1,):
                        x = format_word((i + 1,))
                        line, col = _find_key(text, f"{sec}.inverse", x)
                        raise ConfigError(f"{sec}: wrong inverse image of generator {x}: "
                                          f"{sec}({format_word(w) or '1'}) = {format_word(back) or '1'}", line, col, path)
                phi = Automorphism(tuple(imgs), tuple(inv))
                inverse_given.append(sec)
            else:
                phi = Automorphism.from_images(imgs)
        except AutomorphismError as exc:
            line, _ = _find_key(text, sec, "a")
            raise ConfigError(f"{sec}: {exc}", None if line is None else line - 1, 1, path) from None
        autos.append((sec, phi))
        j += 1
    extra = [s for s in cp.sections() if re.fullmatch(r"t\d+(\.inverse)?", s) and int(re.match(r"t(\d+)", s).group(1)) >= j]
    if extra:
        raise ConfigError(f"section [{extra[0]}] found but generators must be numbered t1, t2, ... without gaps",
                          None, None, path)

    params = dict(DEFAULTS[kind])
    if kind in cp:
        for key, value in cp[kind].items():
            if key not in params:
                line, _ = _find_key(text, kind, key)
                raise ConfigError(f"unknown key {key!r} for kind {kind}", line, 1, path)
            params[key] = value
    return ExperimentConfig(kind, rank, seed, cap, name, autos, params, path,
                            base_dir if base_dir is not None else Path.cwd(), text, inverse_given)


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, None, str(p)) from None
    return parse_config(text, str(p), p.parent)
