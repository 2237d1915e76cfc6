"""Command-line front end: ``hfd <cmd> --k <int> [--out path] [--format text|json|csv]``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import re
import sys
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .domain import ReductionError, UnsupportedField, check_supported, enumerate_s1, reduce
from .geometry import GroupElem, SRPoint, apply, h0_grid
from .presentation import (
    Config,
    PresentationError,
    build_presentation,
    decompose,
    decompose_sides,
    eval_word,
    standard_generators,
    word_str,
)
from .ring import CompletionError, QuadInt, is_pid, make_ctx

EXIT_OK, EXIT_PARSE, EXIT_UNSUPPORTED, EXIT_PIPELINE = 0, 2, 3, 4

log = logging.getLogger("hfd")


class ParseError(ValueError):
    pass


@dataclass
class RunConfig:
    k: int = 0
    newton_tol: float = 1e-12
    cluster_tol: float = 1e-6
    side_tol: float = 1e-7
    q_max: int = 3
    m_max: int = 3
    b_max: int = 3
    order_cap: int = 60
    reduce_cap: int = 10_000
    essential_grid: int = 17
    slice_grid: int = 33
    floor_samples: int = 30000
    coverage_samples: int = 2000
    rays_per_side: int = 48
    seed: int = 1
    format: str = "text"

    def validate(self) -> None:
        if not self.k:
            raise ParseError("--k is required")
        for name in ("newton_tol", "cluster_tol", "side_tol"):
            if not getattr(self, name) > 0:
                raise ParseError(f"{name} must be > 0")
        for name in ("q_max", "m_max", "b_max", "order_cap", "reduce_cap", "essential_grid",
                     "slice_grid", "floor_samples", "coverage_samples", "rays_per_side"):
            if getattr(self, name) < 1:
                raise ParseError(f"{name} must be >= 1")
        if self.format not in ("text", "json", "csv"):
            raise ParseError(f"unknown format {self.format!r}")

    def pipeline(self) -> Config:
        names = {f.name for f in dataclasses.fields(Config)}
        return Config(**{k: v for k, v in dataclasses.asdict(self).items() if k in names})


def load_config(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from exc
    known = {f.name: f.type for f in dataclasses.fields(RunConfig)}
    for key in data:
        if key not in known:
            raise ParseError(f"unknown config key {key!r}")
    return data


def make_run_config(args) -> RunConfig:
    values = load_config(args.config) if args.config else {}
    for f in dataclasses.fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    try:
        cfg = RunConfig(**values)
        for f in dataclasses.fields(RunConfig):
            cast = {"int": int, "float": float, "str": str}[f.type]
            setattr(cfg, f.name, cast(getattr(cfg, f.name)))
    except (TypeError, ValueError) as exc:
        raise ParseError(str(exc)) from exc
    cfg.validate()
    return cfg


# -- parsing of ring elements, points and matrices ----------------------------------------

_TERM = re.compile(r"([+-]?)\s*(\d*)\s*(\*?\s*w)?")


def parse_quadint(text: str, k: int) -> QuadInt:
    """Parse a + b*w notation, e.g. "1+w", "-2*w", "3-w"."""
    s = text.replace(" ", "")
    if not s:
        raise ParseError("empty ring element")
    a = b = 0
    pos = 0
    while pos < len(s):
        m = _TERM.match(s, pos)
        if not m or m.end() == pos:
            raise ParseError(f"cannot parse ring element {text!r}")
        sg, num, w = m.groups()
        if not num and not w:
            raise ParseError(f"cannot parse ring element {text!r}")
        coef = int(num) if num else 1
        if sg == "-":
            coef = -coef
        if w:
            b += coef
        else:
            a += coef
        pos = m.end()
    return QuadInt(k, a, b)


def parse_point(text: str) -> SRPoint:
    parts = [p for p in re.split(r"[,\s]+", text.strip()) if p]
    if len(parts) != 4:
        raise ParseError("a point needs four rationals s1,s2,r,h")
    try:
        vals = [Fraction(p) for p in parts]
        return SRPoint(*vals)
    except (ValueError, ZeroDivisionError) as exc:
        raise ParseError(f"bad point {text!r}: {exc}") from exc


def parse_matrix(text: str, k: int) -> GroupElem:
    parts = [p for p in text.split(",")]
    if len(parts) != 4:
        raise ParseError("a matrix needs four comma-separated ring elements a,b,c,d")
    a, b, c, d = (parse_quadint(p, k) for p in parts)
    if a * d - b * c != QuadInt(k, 1, 0):
        raise ParseError("matrix determinant is not 1")
    return GroupElem(a, b, c, d)


# -- commands -----------------------------------------------------------------------------

def _ctx(cfg: RunConfig, pid: bool = True):
    try:
        ctx = make_ctx(cfg.k)
    except ValueError as exc:
        raise UnsupportedField(str(exc)) from exc
    if pid:
        check_supported(ctx)
    return ctx


def cmd_field(cfg: RunConfig, args) -> str:
    ctx = _ctx(cfg, pid=False)
    info = {
        "k": ctx.k,
        "k0": ctx.k0,
        "omega": f"(1+sqrt({ctx.k}))/{ctx.k0}",
        "eps0": str(ctx.eps0),
        "eps0_float": repr(ctx.eps_float),
        "norm_eps0": ctx.eps0.norm(),
        "pid": is_pid(ctx),
    }
    if cfg.format == "json":
        return json.dumps(info, indent=2) + "\n"
    return "".join(f"{key} {val}\n" for key, val in info.items())


def cmd_s1(cfg: RunConfig, args) -> str:
    ctx = _ctx(cfg)
    S1 = enumerate_s1(ctx)
    if cfg.format == "json":
        return S1.dumps() + "\n"
    if cfg.format == "csv":
        return "c,d,norm_c\n" + "".join(f"{c},{d},{abs(c.norm())}\n" for c, d in S1.pairs)
    lines = [f"S1 for k={ctx.k}: {len(S1)} pairs"]
    lines += [f"c={c}  d={d}  |N(c)|={abs(c.norm())}" for c, d in S1.pairs]
    return "\n".join(lines) + "\n"


def cmd_generators(cfg: RunConfig, args) -> str:
    ctx = _ctx(cfg)
    gens = standard_generators(ctx, enumerate_s1(ctx))
    if cfg.format == "json":
        return json.dumps({"k": ctx.k, "generators": [{"name": n, "matrix": g.to_json()} for n, g in gens]},
                          indent=2) + "\n"
    if cfg.format == "csv":
        return "name,a,b,c,d\n" + "".join(f"{n},{g.a},{g.b},{g.c},{g.d}\n" for n, g in gens)
    return "".join(f"{n} = {g}\n" for n, g in gens)


def cmd_presentation(cfg: RunConfig, args) -> str:
    ctx = _ctx(cfg)
    pres = build_presentation(ctx, cfg.pipeline())
    if cfg.format == "json":
        return json.dumps(pres.to_json(), indent=2) + "\n"
    if cfg.format == "csv":
        return pres.sides_csv() + "\n" + pres.edges_csv()
    return pres.to_text()


def _fmt_point(X) -> dict:
    sr = X.to_sr()
    if sr is not None:
        return {"s1": str(sr.s1), "s2": str(sr.s2), "r": str(sr.r), "h": str(sr.h)}
    return {"x1": str(X.x1), "x2": str(X.x2), "y1sq": str(X.y1sq), "y2sq": str(X.y2sq)}


def cmd_reduce(cfg: RunConfig, args) -> str:
    ctx = _ctx(cfg)
    if not args.point:
        raise ParseError("reduce needs --point s1,s2,r,h")
    Z = parse_point(args.point)
    res = reduce(ctx, enumerate_s1(ctx), Z, cap=cfg.reduce_cap)
    ok = res.point == apply(res.gamma, Z)
    out = {"point": _fmt_point(res.point), "gamma": res.gamma.to_json(), "steps": len(res.steps),
           "verified": ok}
    if cfg.format == "json":
        return json.dumps(out, indent=2) + "\n"
    p = out["point"]
    return ("reduced " + " ".join(f"{k}={v}" for k, v in p.items()) + "\n"
            f"gamma {res.gamma}\nsteps {len(res.steps)}\nverified {ok}\n")


def cmd_decompose(cfg: RunConfig, args) -> str:
    ctx = _ctx(cfg)
    if not args.matrix:
        raise ParseError("decompose needs --matrix a,b,c,d")
    M = parse_matrix(args.matrix, ctx.k)
    S1 = enumerate_s1(ctx)
    if args.sides:
        pres = build_presentation(ctx, cfg.pipeline(), S1)
        word = decompose_sides(pres, M, cap=cfg.reduce_cap)
        ok = eval_word(word, pres.gen_dict(), ctx.k) == M
    else:
        word = decompose(ctx, S1, M)
        ok = eval_word(word, dict(standard_generators(ctx, S1)), ctx.k) == M
    if cfg.format == "json":
        return json.dumps({"word": word_str(word), "length": len(word), "verified": ok}, indent=2) + "\n"
    return f"word {word_str(word)}\nverified {ok}\n"


def cmd_slice(cfg: RunConfig, args) -> str:
    ctx = _ctx(cfg)
    S1 = enumerate_s1(ctx)
    e2 = ctx.eps_float ** 2
    r = float(args.r) if args.r is not None else 1.0
    if not (1 / e2 * (1 - 1e-12) <= r <= e2 * (1 + 1e-12)):
        raise ParseError(f"r must lie in [eps0^-2, eps0^2] = [{1 / e2}, {e2}]")
    n = cfg.slice_grid
    s = np.linspace(-0.5, 0.5, n)
    g1, g2 = np.meshgrid(s, s, indexing="ij")
    h = h0_grid(ctx, S1, g1.ravel(), g2.ravel(), np.full(n * n, r))
    rows = [f"{float(a)!r},{float(b)!r},{float(v)!r}" for a, b, v in zip(g1.ravel(), g2.ravel(), h)]
    return "s1,s2,h0\n" + "\n".join(rows) + "\n"


COMMANDS = {
    "field": cmd_field,
    "s1": cmd_s1,
    "generators": cmd_generators,
    "presentation": cmd_presentation,
    "reduce": cmd_reduce,
    "decompose": cmd_decompose,
    "slice": cmd_slice,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hfd", description="Fundamental domains and presentations of Hilbert modular groups.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--k", type=int)
    p.add_argument("--out")
    p.add_argument("--format", choices=["text", "json", "csv"])
    p.add_argument("--config", help="TOML file of RunConfig keys; flags override it")
    p.add_argument("--seed", type=int)
    p.add_argument("--newton-tol", dest="newton_tol", type=float)
    p.add_argument("--cluster-tol", dest="cluster_tol", type=float)
    p.add_argument("--order-cap", dest="order_cap", type=int)
    p.add_argument("--reduce-cap", dest="reduce_cap", type=int)
    p.add_argument("--grid", dest="slice_grid", type=int)
    p.add_argument("--point", help="s1,s2,r,h as rationals (reduce)")
    p.add_argument("--matrix", help="a,b,c,d in a+b*w notation (decompose)")
    p.add_argument("--sides", action="store_true", help="decompose over the side generators")
    p.add_argument("--r", type=float, help="fixed r for slice")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_PARSE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = make_run_config(args)
        text = COMMANDS[args.command](cfg, args)
    except ParseError as exc:
        print(f"hfd: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except UnsupportedField as exc:
        print(f"hfd: unsupported field: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except (PresentationError, ReductionError, CompletionError, ArithmeticError) as exc:
        print(f"hfd: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
