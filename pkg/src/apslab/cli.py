"""Command-line runner: ``apslab <task> --config FILE --out FILE [--format jsonl|csv] [--seed N]``.

Every record carries named outputs, each with an ``_err`` companion;
complex outputs put the real part under the plain name and add ``_im``.
Emission is deterministic: identical config and seed give identical
bytes.  Wall times go to a ``<out>.timing.json`` sidecar and to stderr so
that they do not disturb the emitted file.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from dataclasses import dataclass, field
from math import isfinite
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, element, integers, load, number, numbers
from .errors import ApsLabError, ConfigInvalid, IoFailure

BASE_COLUMNS = ("record", "task", "status", "config_hash", "seed", "version", "error")


@dataclass
class ResultRecord:
    task: str
    config_hash: str
    seed: int
    outputs: dict = field(default_factory=dict)   # name -> (value, err)
    labels: dict = field(default_factory=dict)    # name -> str
    status: str = "ok"
    error: str = ""
    wall_time: float = 0.0
    version: str = __version__

    def put(self, name: str, value, err: float = 0.0):
        self.outputs[name] = (value, float(err))


# -- building blocks from config sections -------------------------------------

def _action(cfg: RunConfig):
    from .geometry import ActionSpec

    a = cfg.section("action")
    return ActionSpec(a.get("kind", "trivial"), int(number(a.get("n", "1"))))


def _boundary(cfg: RunConfig, a: float | None = None):
    from .geometry import build_boundary_operator

    b = cfg.section("boundary")
    if not b:
        raise ConfigInvalid("task needs a [boundary] section")
    spec = {"action": _action(cfg)}
    if "l" in b:
        spec["L"] = number(b["l"])
    if a is not None:
        spec["a"] = a
    elif "a" in b:
        spec["a"] = numbers(b["a"])[0]
    for key in ("rank", "ncut"):
        if key in b:
            spec["Ncut" if key == "ncut" else key] = int(number(b[key]))
    for key in ("holonomy", "potential", "potential_sin"):
        if key in b:
            spec[key] = numbers(b[key])
    try:
        return build_boundary_operator(spec)
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(str(exc)) from exc


def _scenario(cfg: RunConfig):
    from .geometry import ScenarioSpec

    s = cfg.section("scenario")
    if not s:
        raise ConfigInvalid("task needs a [scenario] section")
    kw = {"action": _action(cfg)}
    if "kind" in s:
        kw["kind"] = s["kind"]
    for key in ("a_minus", "a_plus", "buffer", "eps_collar"):
        if key in s:
            kw[key] = number(s[key])
    if "l" in s:
        kw["L"] = number(s["l"])
    if "ncut" in s:
        kw["Ncut"] = int(number(s["ncut"]))
    try:
        return ScenarioSpec(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(str(exc)) from exc


def _elements(cfg: RunConfig, default=(0,)):
    g = cfg.section("task").get("g")
    return integers(g) if g else tuple(default)


def _index_cfg(cfg: RunConfig):
    from .eta import EtaConfig
    from .index import IndexConfig

    n = cfg.section("numerics")
    kw = {}
    if "t" in n:
        kw["t"] = numbers(n["t"])
    if "eps_collar" in n:
        kw["eps_collar"] = numbers(n["eps_collar"])
    for key in ("h", "window", "lam_cut", "eps"):
        if key in n:
            kw[key] = number(n[key])
    if "eps_t" in n:
        kw["eta"] = EtaConfig(eps_t=number(n["eps_t"]))
    try:
        return IndexConfig(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(str(exc)) from exc


def _t_grid(n: dict, default=None):
    if "t_grid" in n:
        return numbers(n["t_grid"])
    if "t_min" in n:
        lo, hi = number(n["t_min"]), number(n["t_max"])
        count = int(number(n.get("t_count", "20")))
        return tuple(np.linspace(lo, hi, count).tolist())
    if default is None:
        raise ConfigInvalid("need t_grid or t_min/t_max in [numerics]")
    return default


# -- tasks ------------------------------------------------------------------------

def _task_eta(cfg, rec_factory):
    from .eta import EtaConfig, eta_invariant, perturb, projection_trace
    from .oracles import eta_cover_closed, eta_zeta

    n = cfg.section("numerics")
    ecfg = EtaConfig(eps_t=number(n.get("eps_t", "0.05")))
    shifts = numbers(n["shift"]) if "shift" in n else (0.0,)
    avals = numbers(cfg.section("boundary").get("a", "")) or (None,)
    for a, g in ((a, g) for a in avals for g in _elements(cfg)):
        op = _boundary(cfg, a)
        base = eta_invariant(op, g, ecfg) if any(shifts) else None
        trp = projection_trace(op, g).trP if any(shifts) else 0j
        for eps in shifts:
            rec = rec_factory()
            rec.put("a", op.a)
            rec.put("g", g)
            rec.put("shift", eps)
            target = perturb(op, eps) if eps else op
            r = eta_invariant(target, g, ecfg)
            rec.put("eta", r.value, r.err)
            if op.is_cover:
                if g:
                    rec.put("oracle", eta_cover_closed(g, op.L), 0.0)
            elif op.rank == 1 and not op.has_potential:
                m = op.action.order or 1
                rec.put("oracle", eta_zeta(target.a, op.L, m, g, op.orientation), 1e-15)
            if eps:
                rec.put("eta_unshifted", base.value, base.err)
                rec.put("trP", trp)
                rec.put("shift_law_residual", abs(r.value - (trp + base.value)), r.err + base.err)
            yield rec


def _index_record(rec, rep, verify: bool):
    rec.put("g", rec.labels.pop("_g"))
    err = rep.err
    rec.put("ind_g", rep.ind_g, err)
    rec.put("tr_S0", rep.tr_S0, err)
    rec.put("tr_S1", rep.tr_S1, err)
    rec.put("t", rep.t)
    rec.put("eps_collar", rep.eps_collar)
    rec.put("oracle_flow", rep.oracle_flow)
    rec.put("oracle_kernel", rep.oracle_kernel, 1e-6)
    for name in ("interior_local", "mismatch", "boundary"):
        rec.put(name, rep.terms[name], err)
    if "t" in rep.independence:
        rec.put("ind_g_t2", rep.independence["t"][1], err)
        rec.put("t2", rep.independence["t"][0])
    if "eps_collar" in rep.independence:
        rec.put("ind_g_eps_collar2", rep.independence["eps_collar"][1], err)
        rec.put("eps_collar2", rep.independence["eps_collar"][0])
    if verify:
        rec.put("interior", rep.interior, rep.errors.get("interior", 0.0))
        rec.put("interior_drift", rep.interior_drift)
        rec.put("eta", rep.eta, rep.errors.get("eta", 0.0))
        rec.put("trP", rep.trP)
        rec.put("residual", rep.residual, err)
    return rec


def _task_index(cfg, rec_factory, verify: bool = False):
    from .index import g_index_many, verify_aps

    s = _scenario(cfg)
    icfg = _index_cfg(cfg)
    gs = _elements(cfg)
    mode = cfg.section("task").get("mode", "index")
    if mode == "compact" and not verify:
        yield from _index_compact(cfg, s, icfg, rec_factory)
        return
    if mode == "mismatch" and not verify:
        yield from _index_mismatch(cfg, s, gs, icfg, rec_factory)
        return
    if mode != "index":
        raise ConfigInvalid(f"unknown index mode {mode!r}")
    if verify:
        reps = [verify_aps(s, g, icfg) for g in gs]
    else:
        reps = g_index_many(s, gs, cfg=icfg)
    for g, rep in zip(gs, reps):
        rec = rec_factory()
        rec.labels["_g"] = g
        yield _index_record(rec, rep, verify)


def _index_compact(cfg, s, icfg, rec_factory):
    from .index import compact_decomposition, cylinder_boundary_term

    n = cfg.section("numerics")
    t = icfg.t[0]
    dec = compact_decomposition(s, t, icfg)
    rec = rec_factory()
    rec.put("t", t)
    for name, v in dec["terms"].items():
        rec.put(name, v, dec["err"])
    rec.put("total", dec["total"], dec["err"])
    rec.put("oracle", dec["oracle"])
    rec.put("decomposition_residual", abs(dec["total"] - dec["oracle"]), dec["err"])
    yield rec
    t_small = number(n.get("t_small", "0.01"))
    bt = cylinder_boundary_term(s, 0, t_small, icfg.eps_collar[0])
    rec = rec_factory()
    rec.put("t", t_small)
    rec.put("boundary", bt.value, bt.err)
    rec.put("boundary_quadrature", bt.quadrature)
    rec.put("boundary_residual", abs(bt.value - bt.quadrature))
    yield rec


def _index_mismatch(cfg, s, gs, icfg, rec_factory):
    from .index import interior_mismatch_term

    ts = numbers(cfg.section("numerics").get("t_mismatch", "0.1, 0.05, 0.02, 0.01"))
    for g in gs:
        for t, v in zip(ts, interior_mismatch_term(s, g, list(ts), icfg)):
            rec = rec_factory()
            rec.put("g", g)
            rec.put("t", t)
            rec.put("mismatch", v.value, v.err)
            yield rec


def _group(cfg: RunConfig):
    from . import groups

    gsec = cfg.section("group")
    kind = gsec.get("kind", "free_abelian")
    if kind == "free_abelian":
        return groups.free_abelian(int(number(gsec.get("rank", "2"))))
    if kind == "integers":
        return groups.integers()
    if kind == "cyclic":
        return groups.cyclic(int(number(gsec.get("order", "2"))))
    if kind == "heisenberg":
        return groups.heisenberg(int(number(gsec.get("radius_cap", "8"))))
    raise ConfigInvalid(f"unsupported group kind {kind!r} for the CLI")


def _task_group_norm(cfg, rec_factory, seed):
    from .groups import (
        GroupFunction, conjugacy_enumeration, growth_fit, ks_seminorm, mu_brute_force, mu_profile,
        orbital_trace, submultiplicativity,
    )

    G = _group(cfg)
    fsec = cfg.section("function")
    gsec = cfg.section("group")
    g = element(gsec["element"]) if "element" in gsec else G.identity
    radius = int(number(fsec.get("radius", "3")))
    kmax = int(number(gsec.get("kmax", "8")))
    fit = growth_fit(conjugacy_enumeration(G, g, kmax), kmax)
    d = number(gsec["d"]) if "d" in gsec else float(fit.d)
    funcs = []
    if "support" in fsec:
        vals = {}
        for part in fsec["support"].split(";"):
            if part.strip():
                key, val = part.rsplit(":", 1)
                vals[element(key)] = number(val)
        funcs.append(GroupFunction(G, vals))
    count = int(number(fsec.get("random", "0")))
    if count:
        rng = np.random.default_rng(seed)
        ball = sorted(G.ball(radius))
        for _ in range(count):
            pick = rng.choice(len(ball), size=min(6, len(ball)), replace=False)
            funcs.append(GroupFunction(G, {ball[i]: float(rng.normal()) for i in sorted(pick)}))
    if not funcs:
        raise ConfigInvalid("[function] needs support or random")
    rng = np.random.default_rng([seed, 1])
    ball = sorted(G.ball(radius))
    mu_radii = numbers(fsec.get("mu_radii", "1, 2, 3"))
    probes = int(number(fsec.get("probes", "4")))
    for i, f in enumerate(funcs):
        supports = [[ball[j] for j in rng.choice(len(ball), size=min(k, len(ball)), replace=False)]
                    for k in (2, 3, 4, 6)[:probes]]
        gap = max(abs(mu_brute_force(f, r, supports) - mu_profile(f, r)) for r in mu_radii)
        lhs, rhs = submultiplicativity(f, funcs[(i + 1) % len(funcs)], d)
        rec = rec_factory()
        rec.put("function", i)
        rec.put("growth_d", fit.d)
        rec.put("growth_C", fit.C)
        rec.put("d", d)
        rec.put("l1", f.l1())
        rec.put("l2", f.l2())
        rec.put("ks_seminorm", ks_seminorm(f, d))
        rec.put("mu_1", mu_profile(f, 1))
        rec.put("mu_brute_gap", gap)
        rec.put("submult_lhs", lhs)
        rec.put("submult_rhs", rhs)
        rec.put("orbital_trace", orbital_trace(G, g, f))
        yield rec


def _task_trace_sweep(cfg, rec_factory, seed=0):
    from .eta import eta_integrand
    from .heat import g_trace, heat_kernel, spectral_trace

    op = _boundary(cfg)
    n = cfg.section("numerics")
    check = n.get("check")
    if check == "trace_property":
        yield from _check_trace_property(op, n, _elements(cfg), rec_factory, seed)
        return
    if check == "tr_factorization":
        yield from _check_tr_factorization(op, n, _elements(cfg), rec_factory)
        return
    if check:
        raise ConfigInvalid(f"unknown check {check!r}")
    ts = sorted(_t_grid(n))
    for g in _elements(cfg):
        for t in ts:
            rec = rec_factory()
            rec.put("g", g)
            rec.put("t", t)
            if op.is_cover:
                tr = g_trace(heat_kernel(op, t), g)
                rec.put("heat_trace", tr.value, tr.err)
            else:
                rec.put("heat_trace", spectral_trace(op, lambda lam: np.exp(-t * lam**2), g),
                        op.heat_tail_bound(t))
            # Tr_g(D e^{-t D^2}) is the eta integrand at r = sqrt(t)
            rec.put("eta_integrand", eta_integrand(op, g, t**0.5))
            yield rec


def _check_trace_property(op, n, gs, rec_factory, seed):
    from .heat import random_cover_kernel, random_equivariant_circle_kernel, trace_property_residual

    rng = np.random.default_rng(seed)
    make = random_cover_kernel if op.is_cover else random_equivariant_circle_kernel
    for i in range(int(number(n.get("pairs", "10")))):
        S, T = make(op, rng), make(op, rng)
        for g in gs:
            rec = rec_factory()
            rec.put("pair", i)
            rec.put("g", g)
            rec.put("residual", trace_property_residual(S, T, g, op))
            yield rec


def _check_tr_factorization(op, n, gs, rec_factory):
    from .groups import orbital_trace
    from .heat import TR_map, g_trace, heat_kernel

    radius = int(number(n.get("radius", "6")))
    for t in numbers(n.get("t", "0.5")):
        k = heat_kernel(op, t)
        tr = TR_map(k, radius)
        for g in gs:
            direct = g_trace(k, g, "fundamental")
            factored = orbital_trace(tr.group, g if op.is_cover else g % (op.action.order or 1), tr)
            rec = rec_factory()
            rec.put("g", g)
            rec.put("t", t)
            rec.put("g_trace", direct.value, direct.err)
            rec.put("tau_TR", factored)
            rec.put("residual", abs(direct.value - factored), direct.err)
            yield rec


def _task_decay(cfg, rec_factory):
    from .eta import decay_diagnostic

    op = _boundary(cfg)
    n = cfg.section("numerics")
    ts = _t_grid(n, tuple(np.linspace(2.0, 8.0, 13).tolist()))
    for g in _elements(cfg, (1,) if op.is_cover else (0,)):
        r = decay_diagnostic(op, g, ts)
        rec = rec_factory()
        rec.put("g", g)
        rec.labels["regime"] = r.regime
        rec.put("gap", r.gap)
        rec.put("C", r.C)
        rec.put("slope", r.slope)
        rec.put("holds", int(r.holds))
        yield rec


def run(cfg: RunConfig, seed: int = 0) -> list[ResultRecord]:
    """Execute the configured task; computation errors become failed records."""
    h = cfg.hash()
    task = cfg.task

    def factory():
        return ResultRecord(task, h, seed)

    gens = {
        "eta": lambda: _task_eta(cfg, factory),
        "index": lambda: _task_index(cfg, factory),
        "verify-aps": lambda: _task_index(cfg, factory, verify=True),
        "group-norm": lambda: _task_group_norm(cfg, factory, seed),
        "trace-sweep": lambda: _task_trace_sweep(cfg, factory, seed),
        "decay": lambda: _task_decay(cfg, factory),
    }
    out = []
    it = gens[task]()
    while True:
        t0 = time.perf_counter()
        try:
            rec = next(it)
        except StopIteration:
            break
        except ConfigInvalid:
            raise
        except (ApsLabError, ValueError, ArithmeticError) as exc:
            rec = factory()
            rec.status = "failed"
            rec.error = f"{type(exc).__name__}: {exc}"
            rec.wall_time = time.perf_counter() - t0
            out.append(rec)
            break
        rec.wall_time = time.perf_counter() - t0
        out.append(rec)
    return out


# -- emission ---------------------------------------------------------------------

def fmt_float(x: float) -> str:
    x = float(x)
    if not isfinite(x):
        return "nan" if x != x else ("inf" if x > 0 else "-inf")
    return f"{x:.16e}"


def _flatten(rec: ResultRecord) -> dict:
    row = {
        "record": None,
        "task": rec.task,
        "status": rec.status,
        "config_hash": rec.config_hash,
        "seed": rec.seed,
        "version": rec.version,
        "error": rec.error,
    }
    row.update(rec.labels)
    for name, (v, err) in rec.outputs.items():
        if isinstance(v, (complex, np.complexfloating)):
            row[name] = float(v.real)
            row[name + "_im"] = float(v.imag)
        elif isinstance(v, (bool, np.bool_)):
            row[name] = int(v)
        elif isinstance(v, (int, np.integer)):
            row[name] = int(v)
        else:
            row[name] = float(v)
        row[name + "_err"] = float(err)
    return row


def _cell(v) -> str:
    if isinstance(v, float):
        return fmt_float(v)
    if v is None:
        return ""
    return str(v)


def _json_value(v) -> str:
    if isinstance(v, float):
        s = fmt_float(v)
        return s if isfinite(v) else json.dumps(s)
    if isinstance(v, int):
        return str(v)
    if v is None:
        return "null"
    return json.dumps(str(v))


def render(records: list[ResultRecord], fmt: str) -> str:
    rows = []
    for i, rec in enumerate(records):
        row = _flatten(rec)
        row["record"] = i
        rows.append(row)
    if fmt == "jsonl":
        lines = ["{" + ",".join(f"{json.dumps(k)}:{_json_value(v)}" for k, v in row.items()) + "}" for row in rows]
        return "".join(line + "\n" for line in lines)
    if fmt == "csv":
        cols = list(BASE_COLUMNS)
        for row in rows:
            for k in row:
                if k not in cols:
                    cols.append(k)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for row in rows:
            w.writerow([_cell(row.get(c)) for c in cols])
        return buf.getvalue()
    raise ValueError(f"unknown format {fmt!r}")


def emit(records: list[ResultRecord], path: str | Path, fmt: str = "jsonl") -> None:
    p = Path(path)
    try:
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(render(records, fmt))
        timing = {str(i): round(r.wall_time, 6) for i, r in enumerate(records)}
        p.with_name(p.name + ".timing.json").write_text(json.dumps(timing, sort_keys=True) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {p}: {exc}") from exc


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="apslab", description=__doc__.splitlines()[0])
    ap.add_argument("task", choices=("eta", "index", "verify-aps", "group-norm", "trace-sweep", "decay"))
    ap.add_argument("--config", required=True)
    ap.add_argument("--out", required=True)
    ap.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if not 0 <= args.seed < 2**64:
        ap.error("seed must be an unsigned 64-bit integer")
    try:
        cfg = load(args.config)
        if cfg.task != args.task:
            raise ConfigInvalid(f"config is for task {cfg.task!r}, not {args.task!r}")
        records = run(cfg, args.seed)
        emit(records, args.out, args.format)
    except (ConfigInvalid, IoFailure) as exc:
        print(f"apslab: {exc}", file=sys.stderr)
        return 2
    for i, r in enumerate(records):
        print(f"record {i}: {r.status} ({r.wall_time:.2f} s){' ' + r.error if r.error else ''}", file=sys.stderr)
    return 0 if all(r.status == "ok" for r in records) else 1


if __name__ == "__main__":
    sys.exit(main())
