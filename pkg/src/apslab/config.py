"""Run configurations: INI files parsed with :mod:`configparser`.

Sections
--------
``[task]``       name (eta | index | verify-aps | group-norm | trace-sweep | decay), g, mode
``[boundary]``   L, a, rank, holonomy, potential, potential_sin, Ncut
``[action]``     kind (trivial | rotation | cover), n
``[scenario]``   kind, a_minus, a_plus, L, buffer, eps_collar, Ncut
``[group]``      kind, rank, order, element, d, kmax, radius_cap
``[function]``   support (``elem:value; elem:value``) or random, radius, mu_radii, probes
``[numerics]``   free-form numeric knobs; lists are comma separated

Numbers accept the token ``pi`` (e.g. ``L = 2*pi``).  Elements of
product groups are written as ``(a,b)`` or ``(a,b,c)``.
"""
from __future__ import annotations

import configparser
import hashlib
import json
import re
from dataclasses import dataclass
from math import pi
from pathlib import Path

from .errors import ConfigInvalid

TASKS = ("eta", "index", "verify-aps", "group-norm", "trace-sweep", "decay")
SECTIONS = {"task", "boundary", "action", "scenario", "group", "function", "numerics"}
_NUM = re.compile(r"^[0-9eE+\-*/. ()pi]+$")


@dataclass(frozen=True)
class RunConfig:
    sections: dict
    source: str = ""

    @property
    def task(self) -> str:
        return self.sections["task"]["name"]

    def section(self, name: str) -> dict:
        return self.sections.get(name, {})

    def hash(self) -> str:
        return config_hash(self.sections)


def config_hash(sections: dict) -> str:
    canon = json.dumps(sections, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def number(text: str) -> float:
    s = text.strip().lower()
    if not _NUM.match(s):
        raise ConfigInvalid(f"not a number: {text!r}")
    try:
        return float(eval(s, {"__builtins__": {}}, {"pi": pi}))  # restricted to digits, operators and pi
    except Exception as exc:
        raise ConfigInvalid(f"not a number: {text!r}") from exc


def numbers(text: str) -> tuple[float, ...]:
    return tuple(number(p) for p in text.split(",") if p.strip())


def integers(text: str) -> tuple[int, ...]:
    out = []
    for p in text.split(","):
        if p.strip():
            v = number(p)
            if v != int(v):
                raise ConfigInvalid(f"expected an integer, got {p!r}")
            out.append(int(v))
    return tuple(out)


def element(text: str):
    s = text.strip()
    if s.startswith("("):
        if not s.endswith(")"):
            raise ConfigInvalid(f"bad element {text!r}")
        return tuple(int(number(p)) for p in s[1:-1].split(","))
    return int(number(s))


def parse_text(text: str, source: str = "") -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text, source=source or "<string>")
    except configparser.Error as exc:
        raise ConfigInvalid(str(exc)) from exc
    sections = {}
    for name in cp.sections():
        if name not in SECTIONS:
            raise ConfigInvalid(f"unknown section [{name}]")
        sections[name] = {k: " ".join(v.split()) for k, v in cp.items(name)}
    if "task" not in sections or "name" not in sections["task"]:
        raise ConfigInvalid("missing [task] name")
    if sections["task"]["name"] not in TASKS:
        raise ConfigInvalid(f"unknown task {sections['task']['name']!r}")
    return RunConfig(sections, source)


def load(path: str | Path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigInvalid(f"cannot read {p}: {exc}") from exc
    return parse_text(text, str(p))
