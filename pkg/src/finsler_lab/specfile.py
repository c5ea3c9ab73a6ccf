"""Metric spec files: INI-style ``key = value`` text with section headers.

Example::

    [metric]
    dim = 2
    F = sqrt(y1^2 + y2^2) + 0.3*y1
    ; or L = ..., optional sigma = <expression in x>

    [candidates]
    f = sqrt(y1^2 + y2^2)
    fprime = (x1*y1 + x2*y2) / sqrt(y1^2 + y2^2)
    P = ...

    [spray]
    preset = geodesic        ; geodesic | flat | user (then G1 = ..., G2 = ...)

    [domain]
    x_min = -0.5, -0.5
    x_max = 0.5, 0.5

    [sampling]
    seed = 0
    samples = 50
"""
from __future__ import annotations

import configparser
import hashlib
import re
from dataclasses import dataclass, field
from pathlib import Path

from . import expr as ex
from .expr import Expr
from .geometry import (
    HomogeneityError, MetricSpec, SampleDomain, SpraySpec, flat_spray, geodesic_spray,
    homogeneity_residual, LIOUVILLE_REJECT_TOL, sample_points,
)
from .invariants import VolumeSpec

SECTIONS = {
    "metric": {"dim", "f", "l", "sigma"},
    "candidates": {"f", "fprime", "p"},
    "spray": {"preset"},
    "domain": {"x_min", "x_max"},
    "sampling": {"seed", "samples"},
}


class SpecError(ValueError):
    def __init__(self, source: str, line: int | None, message: str):
        self.source = source
        self.line = line
        where = f"{source}:{line}" if line else source
        super().__init__(f"{where}: {message}")


@dataclass
class SpecFile:
    dim: int
    metric: MetricSpec
    spray: SpraySpec
    volume: VolumeSpec
    f: Expr | None = None
    fprime: Expr | None = None
    P: Expr | None = None
    seed: int = 0
    samples: int = 50
    source: str = "<spec>"
    digest: str = ""
    texts: dict = field(default_factory=dict)

    def points(self, count: int | None = None, seed: int | None = None):
        return sample_points(self.dim, count or self.samples, self.seed if seed is None else seed,
                             self.metric.domain)


def _line_index(text: str) -> dict:
    """(section, key) -> 1-based line number."""
    out = {}
    section = None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        m = re.match(r"\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip().lower()
            out.setdefault((section, None), no)
            continue
        m = re.match(r"([^=:;#\s][^=:]*?)\s*[=:]", line)
        if m and section is not None:
            out.setdefault((section, m.group(1).strip().lower()), no)
    return out


def load_spec(path) -> SpecFile:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as err:
        raise SpecError(str(p), None, f"cannot read spec file: {err.strerror}") from None
    return parse_spec(text, str(p))


def _floats(raw: str, n: int, src, line, key) -> tuple:
    try:
        vals = tuple(float(v) for v in raw.replace(",", " ").split())
    except ValueError:
        raise SpecError(src, line, f"{key} must be a list of numbers") from None
    if len(vals) != n:
        raise SpecError(src, line, f"{key} needs {n} values, got {len(vals)}")
    return vals


def parse_spec(text: str, source: str = "<spec>") -> SpecFile:
    lines = _line_index(text)
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    cp.optionxform = str.lower
    try:
        cp.read_string(text, source=source)
    except configparser.Error as err:
        raise SpecError(source, getattr(err, "lineno", None), str(err).splitlines()[0]) from None

    def line(section, key=None):
        return lines.get((section, key))

    for sec in cp.sections():
        if sec.lower() not in SECTIONS:
            raise SpecError(source, line(sec.lower()), f"unknown section [{sec}]")
        allowed = SECTIONS[sec.lower()]
        for key in cp[sec]:
            if sec.lower() == "spray" and re.fullmatch(r"g\d+", key):
                continue
            if key not in allowed:
                raise SpecError(source, line(sec.lower(), key), f"unknown key {key!r} in [{sec}]")
    if not cp.has_section("metric"):
        raise SpecError(source, None, "missing [metric] section")
    met = cp["metric"]
    if "dim" not in met:
        raise SpecError(source, line("metric"), "missing dim in [metric]")
    try:
        dim = int(met["dim"])
    except ValueError:
        raise SpecError(source, line("metric", "dim"), "dim must be an integer") from None
    if dim < 2:
        raise SpecError(source, line("metric", "dim"), "dim must be at least 2")

    texts = {}

    def expr_of(section, key):
        raw = cp.get(section, key, fallback=None)
        if raw is None:
            return None
        texts[f"{section}.{key}"] = raw
        try:
            return ex.parse(raw, dim)
        except ex.ParseError as err:
            raise SpecError(source, line(section, key), f"{key}: {err}") from None

    F, L = expr_of("metric", "f"), expr_of("metric", "l")
    if (F is None) == (L is None):
        raise SpecError(source, line("metric"), "give exactly one of F or L in [metric]")

    samp = cp["sampling"] if cp.has_section("sampling") else {}
    try:
        seed = int(samp.get("seed", 0))
        samples = int(samp.get("samples", 50))
    except ValueError:
        raise SpecError(source, line("sampling"), "seed and samples must be integers") from None
    if samples < 1:
        raise SpecError(source, line("sampling", "samples"), "samples must be positive")

    domain = None
    if cp.has_section("domain"):
        d = cp["domain"]
        if "x_min" not in d or "x_max" not in d:
            raise SpecError(source, line("domain"), "[domain] needs both x_min and x_max")
        lo = _floats(d["x_min"], dim, source, line("domain", "x_min"), "x_min")
        hi = _floats(d["x_max"], dim, source, line("domain", "x_max"), "x_max")
        if any(a >= b for a, b in zip(lo, hi)):
            raise SpecError(source, line("domain", "x_max"), "x_max must exceed x_min componentwise")
        domain = SampleDomain(lo, hi)

    metric = MetricSpec(dim, F=F, L=L, domain=domain, name=Path(source).stem or "spec")
    pts = sample_points(dim, 32, seed, metric.domain)

    def require(e, degree, section, key):
        if e is None:
            return
        try:
            res = homogeneity_residual(e, degree, pts)
        except ex.DomainError as err:
            raise SpecError(source, line(section, key), f"{key} cannot be evaluated on the domain: {err}") from None
        if res > LIOUVILLE_REJECT_TOL:
            err = HomogeneityError(key, degree, res)
            raise SpecError(source, line(section, key), str(err))

    require(F, 1, "metric", "f")
    require(L, 2, "metric", "l")
    try:
        metric.validate(pts)
    except (ValueError, ArithmeticError) as err:
        raise SpecError(source, line("metric", "f" if F is not None else "l"), str(err)) from None

    sigma = expr_of("metric", "sigma")
    try:
        volume = VolumeSpec(sigma) if sigma is not None else VolumeSpec()
        volume.check_positive(pts)
    except (ValueError, ArithmeticError) as err:
        raise SpecError(source, line("metric", "sigma"), f"sigma: {err}") from None

    f, fprime, P = expr_of("candidates", "f"), expr_of("candidates", "fprime"), expr_of("candidates", "p")
    require(f, 1, "candidates", "f")
    require(fprime, 0, "candidates", "fprime")
    require(P, 1, "candidates", "p")

    kind = cp.get("spray", "preset", fallback="geodesic").strip().lower()
    if kind == "geodesic":
        spray = geodesic_spray(metric)
    elif kind == "flat":
        spray = flat_spray(dim)
    elif kind == "user":
        coeffs = []
        for i in range(1, dim + 1):
            e = expr_of("spray", f"g{i}")
            if e is None:
                raise SpecError(source, line("spray"), f"user spray needs G{i}")
            require(e, 2, "spray", f"g{i}")
            coeffs.append(e)
        spray = SpraySpec(dim, tuple(coeffs), provenance="user")
    else:
        raise SpecError(source, line("spray", "preset"), f"spray preset must be geodesic, flat or user, not {kind!r}")

    digest = hashlib.sha256(text.encode()).hexdigest()
    return SpecFile(dim, metric, spray, volume, f, fprime, P, seed, samples, source, digest, texts)
