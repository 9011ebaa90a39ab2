"""Run configuration stored as an INI file with a single ``[run]`` section."""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from typing import List

COMMANDS = ("count", "msd", "sweep", "mollify", "poisson-check", "fourier-scan", "rotate-scan", "diag")


class ConfigError(ValueError):
    """Unparseable or invalid configuration."""


@dataclass
class RunConfig:
    command: str = "count"
    body: str = "ball:d=2,r=1"
    t: float = 2.0
    R: float = 1.0
    h: float = 1.0
    relative: bool = False
    R_grid: List[float] = field(default_factory=lambda: [2.0**k for k in range(4, 12)])
    window: str = "full"
    eps: float = 0.1
    tau: float = 1.0
    K: int = 200
    tail_tol: float = 1e-4
    xi_min: float = 1.0
    xi_max: float = 1000.0
    n_xi: int = 400
    directions: List[float] = field(default_factory=lambda: [0.0, 0.7853981633974483])
    angles: List[float] = field(default_factory=lambda: [0.0])
    rot_R: float = 256.0
    rot_K: int = 100000
    strip: str = "normal"
    mode: str = "sup"
    seed: int = 0
    out: str = "out"
    threads: int = 1
    budget: int = 2**28

    # ---- serialization

    def to_ini(self) -> str:
        lines = ["[run]"]
        for f in fields(self):
            lines.append(f"{f.name} = {_fmt(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_ini())

    @classmethod
    def from_ini(cls, text: str, source: str = "<config>") -> "RunConfig":
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        try:
            cp.read_string(text, source=source)
        except configparser.Error as e:
            raise ConfigError(f"{source}: {e}") from None
        if not cp.has_section("run"):
            raise ConfigError(f"{source}: missing [run] section")
        cfg = cls()
        cfg.update(dict(cp.items("run")), source)
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
        return cls.from_ini(text, str(path))

    def update(self, values: dict, source: str = "<args>") -> None:
        types = {f.name: f.type for f in fields(self)}
        for key, raw in values.items():
            if key not in types:
                raise ConfigError(f"{source}: unknown field '{key}'")
            try:
                setattr(self, key, _parse(types[key], str(raw)))
            except ValueError as e:
                raise ConfigError(f"{source}: field '{key}': {e}") from None

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command '{self.command}'")
        checks = [
            (self.t >= 0, "t must be >= 0"),
            (self.R >= 0, "R must be >= 0"),
            (self.h > 0, "h must be > 0"),
            (self.eps > 0, "eps must be > 0"),
            (self.K >= 1, "K must be >= 1"),
            (self.rot_K >= 1, "rot_K must be >= 1"),
            (self.threads >= 1, "threads must be >= 1"),
            (self.budget >= 1, "budget must be >= 1"),
            (0 < self.xi_min < self.xi_max, "need 0 < xi_min < xi_max"),
            (self.n_xi >= 2, "n_xi must be >= 2"),
            (self.strip in ("normal", "rotated"), "strip must be normal or rotated"),
            (self.mode in ("sup", "inf"), "mode must be sup or inf"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        if self.window not in ("full", "short"):
            try:
                if float(self.window) <= 0:
                    raise ValueError
            except ValueError:
                raise ConfigError("window must be full, short or a positive number") from None
        if self.command == "sweep":
            g = self.R_grid
            if len(g) < 4 or any(b <= a for a, b in zip(g, g[1:])) or g[0] <= 0:
                raise ConfigError("R_grid must be positive, increasing, with at least 4 points")
        if self.command == "msd" and self.relative and self.R <= 0:
            raise ConfigError("relative form needs R > 0")
        if self.command == "mollify" and not self.eps < self.t:
            raise ConfigError("mollify needs eps < t")
        if self.command == "diag" and not (self.tau >= 1 and 0 < self.eps < 1):
            raise ConfigError("diag needs tau >= 1 and 0 < eps < 1")
        if self.command == "rotate-scan" and not 0 < self.eps <= 0.5:
            raise ConfigError("rotate-scan needs 0 < eps <= 1/2")
        if self.command == "fourier-scan" and self.xi_max / self.xi_min < 100:
            raise ConfigError("fourier-scan grid must cover at least two decades")


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


def _parse(tp, raw: str):
    raw = raw.strip()
    if tp in (bool, "bool"):
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if tp in (int, "int"):
        return int(raw)
    if tp in (float, "float"):
        return float(raw)
    if tp in (str, "str"):
        return raw
    # list of floats
    if not raw:
        return []
    return [float(x) for x in raw.split(",")]
