"""Command-line front end.

Every artifact is either one JSON document or a CSV grid, both carrying
``schema_version``, ``config_hash`` and the index tuple. Output depends
only on the inputs and the configuration, so reruns are byte-identical.

Exit codes: 0 ok, 1 ``verify`` found a failing criterion, 2 usage error,
3 numerical failure (a diagnostic JSON is written to stdout).
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import sys

import click
import numpy as np

from . import elliptic, heun, mfe, monodromy as mono, premodular as pm
from .config import SCHEMA_VERSION, Config, load_config
from .errors import HeunmonError, InvalidInputError, UnsupportedFormError
from .tuples import IndexTuple, as_tuple

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2, 3


def parse_complex(text: str) -> complex:
    """Parse 'a+bi', 'a-bi', 'bi', 'a' (j is accepted for i)."""
    s = str(text).replace(" ", "").lower().replace("j", "i")
    try:
        if not s.endswith("i"):
            return complex(float(s), 0.0)
        body = s[:-1]
        # split at the last sign that is not an exponent sign
        cut = max((k for k, ch in enumerate(body) if ch in "+-" and k > 0 and body[k - 1] != "e"),
                  default=0)
        re_txt, im_txt = body[:cut], body[cut:]
        im = {"": 1.0, "+": 1.0, "-": -1.0}.get(im_txt)
        return complex(float(re_txt) if re_txt else 0.0, im if im is not None else float(im_txt))
    except ValueError:
        raise ValueError(f"cannot parse complex number {text!r}") from None


def parse_tau(text: str) -> complex:
    tau = parse_complex(text)
    if not tau.imag > 0:
        raise ValueError(f"tau must lie in the upper half plane, got {text!r}")
    return tau


class _Complex(click.ParamType):
    name = "complex"

    def convert(self, value, param, ctx):
        if isinstance(value, complex):
            return value
        try:
            return parse_complex(value)
        except ValueError as exc:
            self.fail(str(exc), param, ctx)


class _Tau(click.ParamType):
    name = "tau"

    def convert(self, value, param, ctx):
        if isinstance(value, complex):
            return value
        try:
            return parse_tau(value)
        except ValueError as exc:
            self.fail(str(exc), param, ctx)


class _Tuple(click.ParamType):
    name = "n0,n1,n2,n3"

    def convert(self, value, param, ctx):
        if isinstance(value, IndexTuple):
            return value
        try:
            return as_tuple(value)
        except InvalidInputError as exc:
            self.fail(str(exc), param, ctx)


COMPLEX, TAU, TUPLE = _Complex(), _Tau(), _Tuple()


# ---------------------------------------------------------------------------
# serialization

def jsonable(obj):
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, IndexTuple):
        return list(obj.as_tuple())
    if isinstance(obj, np.ndarray):
        return [jsonable(x) for x in obj.tolist()] if obj.ndim else jsonable(obj.item())
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(x) for x in obj]
    if dataclasses.is_dataclass(obj):
        return {f.name: jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def envelope(command: str, cfg: Config, inputs: dict, result, n=None) -> dict:
    return {"schema_version": SCHEMA_VERSION, "config_hash": cfg.hash(), "command": command,
            "index_tuple": list(as_tuple(n).as_tuple()) if n is not None else None,
            "inputs": jsonable(inputs), "result": jsonable(result)}


def dump_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def dump_csv(header: dict, rows) -> str:
    buf = io.StringIO()
    meta = " ".join(f"{k}={json.dumps(v, sort_keys=True, separators=(',', ':'))}" for k, v in header.items())
    buf.write(f"# {meta}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "re", "im", "abs"])
    for x, y, v in rows:
        v = complex(v)
        w.writerow([repr(float(x)), repr(float(y)), repr(v.real), repr(v.imag), repr(abs(v))])
    return buf.getvalue()


def _emit(ctx, text: str):
    out = ctx.obj["out"]
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


def _grid(m: int):
    t = (np.arange(m) + 0.5) / m
    return [(x, y) for y in t for x in t]


# ---------------------------------------------------------------------------

@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="JSON config file (default: $HEUNMON_CONFIG, else built-in).")
@click.option("--out", type=click.Path(dir_okay=False), help="Write the artifact here instead of stdout.")
@click.pass_context
def main(ctx, config_path, out):
    """Generalized Lame equations: elliptic functions, monodromy, spectral data, pre-modular forms."""
    ctx.ensure_object(dict)
    try:
        ctx.obj["cfg"] = load_config(config_path)
    except (ValueError, OSError) as exc:
        raise click.UsageError(f"bad config: {exc}")
    ctx.obj["out"] = out


@main.command()
@click.option("--tau", type=TAU, required=True)
@click.pass_context
def invariants(ctx, tau):
    """Lattice invariants e_k, g2, g3, eta_1, eta_2."""
    cfg = ctx.obj["cfg"]
    inv = elliptic.invariants(tau, cfg)
    _emit(ctx, dump_json(envelope("invariants", cfg, {"tau": tau}, inv.as_dict())))


@main.command()
@click.option("--tau", type=TAU, required=True)
@click.option("--z", type=COMPLEX, help="Single evaluation point.")
@click.option("--grid", type=int, help="CSV over z = x + y tau, x, y cell centres of an m x m grid.")
@click.option("--kind", type=click.Choice(elliptic.KINDS), default="wp", show_default=True)
@click.pass_context
def wp(ctx, tau, z, grid, kind):
    """Weierstrass functions at a point (JSON) or on a grid (CSV)."""
    cfg = ctx.obj["cfg"]
    if (z is None) == (grid is None):
        raise click.UsageError("give exactly one of --z, --grid")
    if z is not None:
        v = elliptic.eval_weierstrass(kind, z, tau, cfg)
        _emit(ctx, dump_json(envelope("wp", cfg, {"tau": tau, "z": z, "kind": kind}, {kind: v})))
        return
    if grid < 1:
        raise click.UsageError("--grid must be positive")
    pts = _grid(grid)
    zs = np.array([x + y * tau for x, y in pts])
    vals = getattr(elliptic.lattice(tau, cfg), kind)(zs)
    head = {"schema_version": SCHEMA_VERSION, "config_hash": cfg.hash(), "command": "wp",
            "kind": kind, "tau": [tau.real, tau.imag]}
    _emit(ctx, dump_csv(head, [(x, y, v) for (x, y), v in zip(pts, np.atleast_1d(vals))]))


@main.command()
@click.option("--n", "n", type=TUPLE, required=True)
@click.option("--tau", type=TAU, required=True)
@click.pass_context
def spectral(ctx, n, tau):
    """Spectral polynomial Q_n(B; tau): coefficients (highest first) and roots."""
    cfg = ctx.obj["cfg"]
    S = heun.spectral_polynomial(n, tau, cfg)
    roots = sorted(S.roots(), key=lambda b: (round(b.real, 9), round(b.imag, 9)))
    res = {"degree": S.degree, "coefficients": S.coeffs, "roots": roots,
           "fit_residual": S.residual, "nodes": S.nodes,
           "roots_polished": None if S.polished is None else bool(np.all(S.polished))}
    _emit(ctx, dump_json(envelope("spectral", cfg, {"n": n, "tau": tau}, res, n)))


@main.command()
@click.option("--n", "n", type=TUPLE, required=True)
@click.option("--B", "B", type=COMPLEX, required=True)
@click.option("--tau", type=TAU, required=True)
@click.option("--local-check/--no-local-check", default=True, show_default=True)
@click.pass_context
def monodromy(ctx, n, B, tau, local_check):
    """Monodromy matrices, classification and (r, s) data."""
    cfg = ctx.obj["cfg"]
    M = mono.monodromy(n, B, tau, cfg, local_check=local_check)
    _emit(ctx, dump_json(envelope("monodromy", cfg, {"n": n, "B": B, "tau": tau}, M.summary(), n)))


@main.command("premodular-eval")
@click.option("--n", "n", type=TUPLE, required=True)
@click.option("--tau", type=TAU, required=True)
@click.option("--r", type=float)
@click.option("--s", type=float)
@click.option("--grid", type=int, help="CSV over (r, s) cell centres of [0,1]^2.")
@click.pass_context
def premodular_eval(ctx, n, tau, r, s, grid):
    """Evaluate Z^n_{r,s}(tau) at one point (JSON) or on an (r, s) grid (CSV)."""
    cfg = ctx.obj["cfg"]
    if grid is None:
        if r is None or s is None:
            raise click.UsageError("give --r and --s, or --grid")
        v = pm.eval_premodular(n, r, s, tau, cfg)
        res = {"value": v, "weight": pm.builtin_form(n).weight}
        _emit(ctx, dump_json(envelope("premodular-eval", cfg, {"n": n, "r": r, "s": s, "tau": tau}, res, n)))
        return
    rows = []
    for x, y in _grid(grid):
        try:
            rows.append((x, y, pm.eval_premodular(n, x, y, tau, cfg)))
        except HeunmonError:
            rows.append((x, y, complex("nan+nanj")))
    head = {"schema_version": SCHEMA_VERSION, "config_hash": cfg.hash(), "command": "premodular-eval",
            "index_tuple": list(n.as_tuple()), "tau": [tau.real, tau.imag]}
    _emit(ctx, dump_csv(head, rows))


@main.command("premodular-zeros")
@click.option("--n", "n", type=TUPLE, required=True)
@click.option("--tau", type=TAU, help="Search (r, s) at fixed tau.")
@click.option("--r", type=float, help="Fixed r for a tau-segment search.")
@click.option("--s", type=float, help="Fixed s for a tau-segment search.")
@click.option("--tau0", type=TAU)
@click.option("--tau1", type=TAU)
@click.option("--grid", type=int, default=24, show_default=True)
@click.pass_context
def premodular_zeros(ctx, n, tau, r, s, tau0, tau1, grid):
    """Zeros of Z^n in (r, s) at fixed tau, or along a tau segment at fixed (r, s)."""
    cfg = ctx.obj["cfg"]
    if tau is not None:
        zs = pm.zero_search(n, "rs_grid", cfg, tau=tau, grid=grid)
        inputs = {"n": n, "tau": tau, "grid": grid}
    elif None not in (r, s, tau0, tau1):
        zs = pm.zero_search(n, "tau_segment", cfg, r=r, s=s, tau0=tau0, tau1=tau1)
        inputs = {"n": n, "r": r, "s": s, "tau0": tau0, "tau1": tau1}
    else:
        raise click.UsageError("give --tau, or all of --r --s --tau0 --tau1")
    _emit(ctx, dump_json(envelope("premodular-zeros", cfg, inputs, {"zeros": zs, "count": len(zs)}, n)))


@main.command("mfe-count")
@click.option("--n", "n", type=TUPLE, required=True)
@click.option("--tau", type=TAU, required=True)
@click.option("--resolution", type=int, help="Seeds per side of the B-region (default from config).")
@click.pass_context
def mfe_count(ctx, n, tau, resolution):
    """Count even solutions of the mean field equation via unitary monodromy."""
    cfg = ctx.obj["cfg"]
    c = mfe.count_even_solutions(n, tau, resolution=resolution, cfg=cfg)
    res = {"count": c.count, "B": c.B, "certificates": c.certificates, "region": c.region,
           "reliable": c.reliable, "skipped": c.skipped}
    _emit(ctx, dump_json(envelope("mfe-count", cfg, {"n": n, "tau": tau, "resolution": resolution}, res, n)))


@main.command()
@click.option("--only", help="Comma-separated criterion numbers (default: all twelve).")
@click.pass_context
def verify(ctx, only):
    """Run the acceptance suite; exit 1 if any criterion fails."""
    from . import acceptance

    cfg = ctx.obj["cfg"]
    try:
        which = [int(k) for k in only.split(",")] if only else None
    except ValueError:
        raise click.UsageError(f"bad --only value {only!r}")
    if which and not set(which) <= set(acceptance.CRITERIA):
        raise click.UsageError("criteria are numbered 1..12")
    res = acceptance.run_all(which, cfg, echo=lambda line: click.echo(line, err=True))
    # timings vary run to run; keep the artifact deterministic
    body = {str(k): {"ok": v["ok"], "detail": v["detail"]} for k, v in res.items()}
    _emit(ctx, dump_json(envelope("verify", cfg, {"only": which}, body)))
    ctx.exit(EXIT_OK if all(v["ok"] for v in res.values()) else EXIT_FAIL)


def run(args=None) -> int:
    """Invoke the CLI and return its exit code (maps library errors to codes)."""
    try:
        main.main(args=args, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        exc.show()
        return EXIT_USAGE
    except click.Abort:
        return EXIT_USAGE
    except (InvalidInputError, UnsupportedFormError) as exc:
        click.echo(f"usage error: {exc}", err=True)
        return EXIT_USAGE
    except HeunmonError as exc:
        diag = {"schema_version": SCHEMA_VERSION, "error": type(exc).__name__, "message": str(exc)}
        click.echo(dump_json(diag), nl=False)
        return EXIT_NUMERICAL
    return EXIT_OK


def entry():
    sys.exit(run())


if __name__ == "__main__":
    entry()
