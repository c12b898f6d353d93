"""Run configuration stored as a flat ``key = value`` text file."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .errors import ParseError, ValidationError


@dataclass(frozen=True)
class RunConfig:
    lam: float = 0.0
    n: int = 2
    rep: str = "profile"
    h: float = 0.005
    nodes: int = 4096
    xi_step: float = 0.0078125
    seed: int = 0
    jobs: int = 1
    out: str = "out"
    mode: str = "2"
    slack: float = 0.05
    tol_deficit: float = 1e-9
    tol_identity: float = 1e-8
    tol_volume: float = 1e-9
    tol_search: float = 1e-4
    tol_factor3: float = 1e-3
    tol_reflect: float = 1e-6

    def __post_init__(self):
        if not -1.0 < self.lam < 1.0:
            raise ValidationError("lambda must lie in (-1, 1)")
        if self.n < 2:
            raise ValidationError("n must be at least 2")
        if self.rep not in ("profile", "voxel"):
            raise ValidationError("rep must be 'profile' or 'voxel'")
        for f in fields(self):
            if f.name.startswith("tol_") or f.name in ("h", "xi_step", "slack"):
                if not getattr(self, f.name) > 0:
                    raise ValidationError(f"{f.name} must be positive")
        if self.nodes < 2 or self.jobs < 1:
            raise ValidationError("nodes >= 2 and jobs >= 1 required")

    def to_text(self) -> str:
        lines = []
        for k, v in asdict(self).items():
            lines.append(f"{k} = {repr(v) if isinstance(v, float) else v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, source: str = "<config>") -> "RunConfig":
        types = {f.name: f.type for f in fields(cls)}
        kw = {}
        for i, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"{source}: expected 'key = value'", i, 0)
            k, v = (s.strip() for s in line.split("=", 1))
            k = k.replace("-", "_")
            if k == "lambda":
                k = "lam"
            if k not in types:
                raise ParseError(f"{source}: unknown key {k!r}", i, 0)
            conv = {"float": float, "int": int, "str": str}[types[k]]
            try:
                kw[k] = conv(v)
            except ValueError:
                raise ParseError(f"{source}: bad value {v!r} for {k}", i, raw.index(v, raw.index("="))) from None
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_text(Path(path).read_text(), str(path))

    def updated(self, **kw) -> "RunConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def as_dict(self) -> dict:
        return asdict(self)
