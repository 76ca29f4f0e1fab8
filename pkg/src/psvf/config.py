"""Run configuration: built-in defaults, overridden by a key=value file, overridden by flags."""

from __future__ import annotations

import ast
from dataclasses import dataclass, fields, replace

from .core import ON_SIGMA_TOL, TANGENCY_TOL


@dataclass(frozen=True)
class RunConfig:
    on_sigma_tol: float = ON_SIGMA_TOL
    tangency_tol: float = TANGENCY_TOL
    rtol: float = 1e-11
    horizon: float = 8.0
    max_branches: int = 4096
    per_arc: int = 512
    samples: int = 100
    depth: int = 8
    seed: int = 0
    out: str = ""

    def __post_init__(self):
        for name in ("on_sigma_tol", "tangency_tol", "rtol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def merged(self, **overrides):
        known = {f.name for f in fields(self)}
        clean = {k: v for k, v in overrides.items() if k in known and v is not None}
        return replace(self, **clean)

    def apply(self, Z):
        """``Z`` with this configuration's tolerances."""
        meta = dict(Z.meta)
        meta["rtol"] = self.rtol
        return replace(Z, on_sigma_tol=self.on_sigma_tol, tangency_tol=self.tangency_tol, meta=meta)


def parse_config_text(text):
    """Parse ``key = value`` lines; ``#`` starts a comment; section headers are ignored."""
    out = {}
    types = {f.name: f.type for f in fields(RunConfig)}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line or (line.startswith("[") and line.endswith("]")):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in types:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        try:
            val = ast.literal_eval(value)
        except (ValueError, SyntaxError):
            val = value.strip("\"'")
        kind = types[key]
        out[key] = {"float": float, "int": int, "str": str}.get(kind, lambda v: v)(val)
    return out


def load_config(path=None, **overrides):
    """Defaults, then the file at ``path`` (if any), then non-``None`` ``overrides``."""
    cfg = RunConfig()
    if path:
        with open(path) as fh:
            cfg = cfg.merged(**parse_config_text(fh.read()))
    return cfg.merged(**overrides)
