"""Command-line front end.

Every command reads a manifold JSON file (see README) and writes a JSON
report to stdout or ``--output-file``.  Exit codes: 0 success,
1 mathematical obstruction, 2 input error, 3 budget exceeded.
"""
from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass
from typing import Any, Callable, Optional

import click

from .attach import AttachError, SignVector, enumerate_pairs, attach_solve, invariance_check, PairEnumeration
from .deck import DeckError, build_deck_family, verify_family
from .manifold import Kind, ManifoldError, ManifoldSpec, check_condition_B, classify, spec_from_json
from .normalform import (NormalFormError, default_hull_epsilon, hull_polydiscs, mw_normalform,
                         realize_normal_form, rigidity_pipeline)
from .resonance import BudgetExceeded, NotPoincareType, UndecidableResonance, omega_ideal, omega_nu, poincare_scan
from .scalars import get_backend

EXIT_OK, EXIT_OBSTRUCTION, EXIT_INPUT, EXIT_BUDGET = 0, 1, 2, 3

OBSTRUCTIONS = (DeckError, NormalFormError, AttachError, NotPoincareType, UndecidableResonance)


@dataclass
class RunConfig:
    """Options shared by all commands."""

    command: str
    path: str
    order: Optional[int]
    backend: str
    tolerance: float
    kmax: int
    output: str
    output_file: Optional[str]
    seed: int
    eps_class: Optional[str]

    def load(self) -> ManifoldSpec:
        return spec_from_json(self.read_json(), self.order, get_backend(self.backend))

    def read_json(self) -> Any:
        with open(self.path) as fh:
            return json.load(fh)


class Outcome(Exception):
    """Carries a report and an exit code out of a command body."""

    def __init__(self, payload: dict, code: int):
        super().__init__(payload.get("error", ""))
        self.payload, self.code = payload, code


def _jsonable(x: Any) -> Any:
    if isinstance(x, float) and (math.isinf(x) or math.isnan(x)):
        return str(x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, int, float, str)) or x is None:
        return x
    return str(x)


def _text(payload: dict, indent: str = "") -> list:
    lines = []
    for k, v in payload.items():
        if isinstance(v, dict):
            lines.append(f"{indent}{k}:")
            lines.extend(_text(v, indent + "  "))
        elif isinstance(v, list) and len(str(v)) > 100:
            lines.append(f"{indent}{k}: [{len(v)} entries]")
        else:
            lines.append(f"{indent}{k}: {v}")
    return lines


def _emit(cfg: RunConfig, payload: dict) -> None:
    payload = _jsonable(payload)
    if cfg.output == "json":
        out = json.dumps(payload, indent=2)
    else:
        out = "\n".join(_text(payload))
    if cfg.output_file:
        with open(cfg.output_file, "w") as fh:
            fh.write(out + "\n")
    else:
        click.echo(out)


def _run(cfg: RunConfig, body: Callable[[RunConfig], tuple]) -> None:
    try:
        payload, code = body(cfg)
    except Outcome as o:
        payload, code = o.payload, o.code
    except BudgetExceeded as exc:
        payload, code = {"error": "budget exceeded", "detail": str(exc)}, EXIT_BUDGET
    except OBSTRUCTIONS as exc:
        payload, code = {"error": "obstruction", "type": type(exc).__name__, "detail": str(exc)}, EXIT_OBSTRUCTION
    except (ManifoldError, json.JSONDecodeError, OSError, KeyError, TypeError, ValueError) as exc:
        payload, code = {"error": "input", "type": type(exc).__name__, "detail": str(exc)}, EXIT_INPUT
    payload = {"command": cfg.command, "exit_code": code, **payload}
    _emit(cfg, payload)
    sys.exit(code)


def _options(f):
    opts = [
        click.argument("path", type=click.Path(dir_okay=False)),
        click.option("--order", "-N", type=click.IntRange(min=2), default=None,
                     help="Jet order N (overrides the file's truncation)."),
        click.option("--backend", type=click.Choice(["exact", "float"]), default="exact", show_default=True),
        click.option("--tolerance", type=float, default=1e-9, show_default=True,
                     help="Resonance and residual tolerance for the float backend."),
        click.option("--kmax", type=click.IntRange(min=1), default=6, show_default=True,
                     help="Small-divisor levels / hull grid size."),
        click.option("--output", type=click.Choice(["json", "text"]), default="json", show_default=True),
        click.option("--output-file", "-o", type=click.Path(dir_okay=False), default=None),
        click.option("--seed", type=int, default=0, show_default=True,
                     help="Seed for the probabilistic condition B check."),
        click.option("--eps-class", default=None,
                     help="Sign vector for attach, e.g. '+-' (default: all classes)."),
    ]
    for o in reversed(opts):
        f = o(f)
    return f


def _config(name: str, kw: dict) -> RunConfig:
    return RunConfig(name, **kw)


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Deck involutions, normal forms and attached submanifolds of CR singular manifolds."""


# ---------------------------------------------------------------------------
# command bodies
# ---------------------------------------------------------------------------


def cmd_classify(cfg: RunConfig):
    spec = cfg.load()
    rep = classify(spec, seed=cfg.seed)
    out = rep.to_json()
    cert = check_condition_B(spec, seed=cfg.seed)
    out["conditionB_certificate"] = {"holds": cert.holds, "method": cert.method}
    ok = rep.conditionJ is not False and rep.conditionB is not False
    return {"report": out}, EXIT_OK if ok else EXIT_OBSTRUCTION


def cmd_deck(cfg: RunConfig):
    spec = cfg.load()
    fam = build_deck_family(spec)
    out = {"family": fam.to_json()}
    if fam.conditionD:
        out["verification"] = verify_family(fam, spec).to_json()
        return out, EXIT_OK
    return out, EXIT_OBSTRUCTION


def _family(spec: ManifoldSpec):
    fam = build_deck_family(spec)
    if not fam.conditionD:
        raise Outcome({"error": "obstruction", "type": "ConditionD",
                       "family": fam.to_json()}, EXIT_OBSTRUCTION)
    return fam


def cmd_normal_form(cfg: RunConfig):
    spec = cfg.load()
    fam = _family(spec)
    rep = classify(spec, seed=cfg.seed)
    chk = verify_family(fam, spec)
    if not chk.abelian:
        return {"error": "obstruction", "type": "NonAbelian",
                "detail": "the sigma_j do not commute; no abelian normal form"}, EXIT_OBSTRUCTION
    nf = mw_normalform(fam, rep, eps_res=cfg.tolerance)
    out = {"normal_form": nf.to_json()}
    if all(k in (Kind.ELLIPTIC, Kind.COMPLEX) for k in nf.kinds):
        out["realization"] = realize_normal_form(nf).to_json()
    return out, EXIT_OK


def cmd_rigidity(cfg: RunConfig):
    spec = cfg.load()
    res = rigidity_pipeline(spec, report=classify(spec, seed=cfg.seed))
    return {"rigidity": res.to_json()}, EXIT_OK if res.ok else EXIT_OBSTRUCTION


def cmd_attach(cfg: RunConfig):
    spec = cfg.load()
    rep = classify(spec, seed=cfg.seed)
    tol = cfg.tolerance
    if cfg.eps_class:
        eps = SignVector.parse(cfg.eps_class)
        en = PairEnumeration([attach_solve(spec, eps, rep, tol)], {}, 1)
    else:
        en = enumerate_pairs(spec, rep, tol)
    out = en.to_json()
    if en.results:
        fam = build_deck_family(spec)
        if fam.conditionD:
            out["invariance"] = [invariance_check(r, fam, rep).to_json() for r in en.results]
    bad = en.obstruction is not None or bool(en.failures)
    return {"attach": out}, EXIT_OBSTRUCTION if bad else EXIT_OK


def cmd_small_divisors(cfg: RunConfig):
    data = cfg.read_json()
    if isinstance(data, dict) and "nu" in data:
        be = get_backend(cfg.backend)
        nu = [be.from_json(x) for x in data["nu"]]
        r = omega_nu(nu, cfg.kmax, cfg.tolerance)
        return {"omega_nu": r.to_json()}, EXIT_OK
    spec = spec_from_json(data, cfg.order, get_backend(cfg.backend))
    rep = classify(spec, seed=cfg.seed)
    p = rep.p
    maps = []
    for i, m in enumerate(rep.mu):
        row = [1.0] * (2 * p)
        row[i] = complex(m)
        row[p + i] = 1 / complex(m)
        maps.append(row)
    out = {"mu": [str(m) for m in rep.mu], "omega_ideal": omega_ideal(maps, cfg.kmax, cfg.tolerance).to_json()}
    if all(abs(abs(complex(m)) - 1) > 1e-12 for m in rep.mu):
        scan = poincare_scan(rep.mu, min(2 ** cfg.kmax, 64))
        out["poincare_scan"] = scan
    if not any(k is Kind.ELLIPTIC for k in rep.kinds) and cfg.eps_class:
        from .attach import asymptotic_linear
        _, _, nu = asymptotic_linear(rep, SignVector.parse(cfg.eps_class), backend=spec.backend)
        out["omega_nu"] = omega_nu(nu, cfg.kmax, cfg.tolerance).to_json()
    return out, EXIT_OK


def cmd_hull(cfg: RunConfig):
    spec = cfg.load()
    rep = classify(spec, seed=cfg.seed)
    if any(k is not Kind.ELLIPTIC for k in rep.kinds):
        return {"error": "obstruction", "type": "NotElliptic",
                "detail": "hull polydiscs are defined for purely elliptic manifolds"}, EXIT_OBSTRUCTION
    fam = _family(spec)
    nf = mw_normalform(fam, rep, eps_res=cfg.tolerance)
    rf = realize_normal_form(nf)
    eps = default_hull_epsilon(rf)
    steps = cfg.kmax
    rows = []
    for i in range(steps + 1):
        t = eps * i / steps
        rows.append(hull_polydiscs(rf, [t] * rep.p, eps=eps).to_json())
    return {"epsilon": eps, "table": rows}, EXIT_OK


COMMANDS = {
    "classify": cmd_classify,
    "deck": cmd_deck,
    "normal-form": cmd_normal_form,
    "rigidity": cmd_rigidity,
    "attach": cmd_attach,
    "small-divisors": cmd_small_divisors,
    "hull": cmd_hull,
}


def _register(name: str, body: Callable, doc: str) -> None:
    @_options
    def command(**kw):
        _run(_config(name, kw), body)

    command.__doc__ = doc
    main.command(name)(command)


_register("classify", cmd_classify, "Spectrum, Bishop invariants and conditions B/J.")
_register("deck", cmd_deck, "Deck involutions and their verification.")
_register("normal-form", cmd_normal_form, "Abelian normal form of the sigma family and its realization.")
_register("rigidity", cmd_rigidity, "Formal equivalence to the product quadric.")
_register("attach", cmd_attach, "Asymptotic pairs and attached complex submanifolds.")
_register("small-divisors", cmd_small_divisors, "Small-divisor sequences and Poincare witnesses.")
_register("hull", cmd_hull, "Polydisc table of the hull over a grid of x''.")


if __name__ == "__main__":  # pragma: no cover
    main()
