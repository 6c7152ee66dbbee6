"""Command-line front end: ``qcurv <task> --spec FILE``.

A spec file is either a bare channel object (it has a ``"kind"`` key) or an
experiment object with ``"channel"``, ``"metric"``, ``"states"`` and task
options.  Reports are JSON with sorted keys; infinite values are written as
``{"status": "infinite"}``.  Exit codes: 0 success, 1 usage/IO/spec error,
2 certificate failure.
"""

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Optional

import numpy as np

from . import __version__
from .errors import QcurvError, SpecError

TASKS = ("curvature", "wasserstein", "gap", "certify-tc", "certify-ti", "mixing", "intertwine")
CHANNEL_KINDS = ("pauli", "gibbs", "kraus", "bose_beam_splitter", "fermi_beam_splitter",
                 "site_replacement", "depolarizing_semigroup")


@dataclass
class ExperimentSpec:
    task: str
    channel: Optional[dict]
    metric: Optional[dict] = None
    states: Optional[list] = None
    options: dict = field(default_factory=dict)
    tol: float = 1e-8
    seed: int = 0
    steps: int = 6
    channel_ptr: str = "/channel"


# ---------------------------------------------------------------------------
# parsing helpers


def _get(obj, key, ptr, kind=None, default=...):
    if not isinstance(obj, dict):
        raise SpecError(ptr, "expected an object")
    if key not in obj:
        if default is ...:
            raise SpecError(f"{ptr}/{key}", "missing required field")
        return default
    v = obj[key]
    if kind == "int":
        if isinstance(v, bool) or not isinstance(v, int):
            raise SpecError(f"{ptr}/{key}", "expected an integer")
    elif kind == "num":
        if isinstance(v, bool) or not isinstance(v, (int, float, Decimal)):
            raise SpecError(f"{ptr}/{key}", "expected a number")
        v = float(v)
        if not math.isfinite(v):
            raise SpecError(f"{ptr}/{key}", "expected a finite number")
    elif kind == "str" and not isinstance(v, str):
        raise SpecError(f"{ptr}/{key}", "expected a string")
    return v


def parse_matrix(obj, ptr):
    """Nested rows; each entry is a real number or a ``[re, im]`` pair."""
    if not isinstance(obj, list) or not obj or not all(isinstance(r, list) for r in obj):
        raise SpecError(ptr, "expected a non-empty list of rows")
    n = len(obj[0])
    M = np.zeros((len(obj), n), dtype=complex)
    for i, row in enumerate(obj):
        if len(row) != n:
            raise SpecError(f"{ptr}/{i}", "ragged matrix row")
        for j, e in enumerate(row):
            p = f"{ptr}/{i}/{j}"
            if isinstance(e, list):
                if len(e) != 2 or not all(isinstance(t, (int, float, Decimal)) and not isinstance(t, bool) for t in e):
                    raise SpecError(p, "complex entries are [re, im] pairs")
                M[i, j] = complex(float(e[0]), float(e[1]))
            elif isinstance(e, (int, float, Decimal)) and not isinstance(e, bool):
                M[i, j] = float(e)
            else:
                raise SpecError(p, "expected a number or [re, im]")
    return M


def _pauli_spec(obj, ptr):
    from .channels import PauliChannelSpec
    n = _get(obj, "n", ptr, "int")
    if not 1 <= n <= 12:
        raise SpecError(f"{ptr}/n", "n must be between 1 and 12")
    if "depolarizing" in obj:
        p = Decimal(str(_get(obj, "depolarizing", ptr)))
        if n != 1:
            raise SpecError(f"{ptr}/n", "depolarizing shorthand is for one qubit")
        if not Decimal(0) < p < Decimal(1):
            raise SpecError(f"{ptr}/depolarizing", "p must lie in (0, 1)")
        return PauliChannelSpec(1, (("I", float(1 - p)),) + tuple((s, float(p / 3)) for s in "XYZ"))
    terms = _get(obj, "terms", ptr)
    if not isinstance(terms, list) or not terms:
        raise SpecError(f"{ptr}/terms", "expected a non-empty list")
    out = []
    total = Decimal(0)
    for i, t in enumerate(terms):
        p = f"{ptr}/terms/{i}"
        s = _get(t, "string", p, "str")
        w = _get(t, "weight", p)
        if isinstance(w, bool) or not isinstance(w, (int, float, Decimal)):
            raise SpecError(f"{p}/weight", "expected a number")
        w = Decimal(str(w))
        if w <= 0:
            raise SpecError(f"{p}/weight", "weights must be positive")
        if len(s) != n or set(s.upper()) - set("IXYZ"):
            raise SpecError(f"{p}/string", f"expected a Pauli string of length {n}")
        total += w
        out.append((s.upper(), float(w)))
    if abs(total - 1) > Decimal("1e-12"):
        raise SpecError(f"{ptr}/terms", f"weights sum to {total}, not 1")
    if "I" * n not in [s for s, _ in out]:
        raise SpecError(f"{ptr}/terms", "the identity string must be present")
    if len({s for s, _ in out}) != len(out):
        raise SpecError(f"{ptr}/terms", "repeated Pauli string")
    scale = sum(w for _, w in out)
    return PauliChannelSpec(n, tuple((s, w / scale) for s, w in out))


def _gibbs(obj, ptr):
    from .channels import ising_chain
    model = _get(obj, "model", ptr, "str")
    if model != "ising_chain":
        raise SpecError(f"{ptr}/model", "only 'ising_chain' is supported")
    n = _get(obj, "n", ptr, "int")
    if not 1 <= n <= 5:
        raise SpecError(f"{ptr}/n", "n must be between 1 and 5")
    beta = _get(obj, "beta", ptr, "num")
    if beta < 0:
        raise SpecError(f"{ptr}/beta", "beta must be non-negative")
    ham = ising_chain(n, _get(obj, "coupling", ptr, "num", 1.0), _get(obj, "field", ptr, "num", 0.0))
    return ham, beta


def build_channel(obj, ptr="/channel"):
    """Return ``(kind, object)`` for a channel description."""
    kind = _get(obj, "kind", ptr, "str")
    if kind not in CHANNEL_KINDS:
        raise SpecError(f"{ptr}/kind", f"unknown kind {kind!r}")
    if kind == "pauli":
        return kind, _pauli_spec(obj, ptr)
    if kind == "gibbs":
        return kind, _gibbs(obj, ptr)
    if kind == "kraus":
        from .channels import channel_from_kraus
        dim = _get(obj, "dim", ptr, "int")
        ks = _get(obj, "kraus", ptr)
        if not isinstance(ks, list) or not ks:
            raise SpecError(f"{ptr}/kraus", "expected a non-empty list of matrices")
        mats = [parse_matrix(k, f"{ptr}/kraus/{i}") for i, k in enumerate(ks)]
        for i, K in enumerate(mats):
            if K.shape != (dim, dim):
                raise SpecError(f"{ptr}/kraus/{i}", f"expected a {dim}x{dim} matrix")
        try:
            return kind, channel_from_kraus(mats)
        except QcurvError as e:
            raise SpecError(f"{ptr}/kraus", str(e)) from None
    if kind == "bose_beam_splitter":
        from .cvmodels import BeamSplitterSpec, thermal_state
        lam = _get(obj, "lambda", ptr, "num")
        if not 0 < lam <= 1:
            raise SpecError(f"{ptr}/lambda", "lambda must lie in (0, 1]")
        N = _get(obj, "cutoff", ptr, "int")
        if not 1 <= N <= 40:
            raise SpecError(f"{ptr}/cutoff", "cutoff must be between 1 and 40")
        env = _get(obj, "env", ptr, default={"kind": "thermal", "beta": 1.0})
        ek = _get(env, "kind", f"{ptr}/env", "str")
        if ek == "thermal":
            b = _get(env, "beta", f"{ptr}/env", "num")
            if b <= 0:
                raise SpecError(f"{ptr}/env/beta", "beta must be positive")
            sigma = thermal_state(b, N)
        elif ek == "matrix":
            sigma = parse_matrix(_get(env, "matrix", f"{ptr}/env"), f"{ptr}/env/matrix")
        else:
            raise SpecError(f"{ptr}/env/kind", "expected 'thermal' or 'matrix'")
        try:
            return kind, BeamSplitterSpec(lam, sigma, N)
        except QcurvError as e:
            raise SpecError(f"{ptr}/env", str(e)) from None
    if kind == "fermi_beam_splitter":
        lam = _get(obj, "lambda", ptr, "num")
        if not 0 < lam <= 1:
            raise SpecError(f"{ptr}/lambda", "lambda must lie in (0, 1]")
        n = _get(obj, "n", ptr, "int")
        if not 1 <= n <= 3:
            raise SpecError(f"{ptr}/n", "n must be between 1 and 3")
        return kind, (lam, n)
    if kind == "site_replacement":
        dims = _get(obj, "dims", ptr)
        if (not isinstance(dims, list) or not dims
                or not all(isinstance(d, int) and not isinstance(d, bool) and d >= 2 for d in dims)):
            raise SpecError(f"{ptr}/dims", "expected a list of integers >= 2")
        if int(np.prod(dims)) > 16:
            raise SpecError(f"{ptr}/dims", "total dimension is limited to 16")
        return kind, list(dims)
    return kind, None


def build_seminorm(obj, ptr, dim=None):
    from .metrics import SemiNormSpec
    from .channels import pauli_matrix
    v = _get(obj, "variant", ptr, "str")
    if v == "operator_norm":
        d = _get(obj, "dim", ptr, "int", dim)
        if d is None:
            raise SpecError(f"{ptr}/dim", "missing required field")
        return SemiNormSpec.operator_norm(d)
    if v in ("commutator_max", "commutator_l2"):
        gens = _get(obj, "generators", ptr)
        if not isinstance(gens, list) or not gens:
            raise SpecError(f"{ptr}/generators", "expected a non-empty list")
        mats = []
        for i, g in enumerate(gens):
            if isinstance(g, str):
                if set(g.upper()) - set("IXYZ") or not g:
                    raise SpecError(f"{ptr}/generators/{i}", "not a Pauli string")
                mats.append(pauli_matrix(g.upper()))
            else:
                mats.append(parse_matrix(g, f"{ptr}/generators/{i}"))
        if len({m.shape for m in mats}) != 1:
            raise SpecError(f"{ptr}/generators", "generators of different sizes")
        return (SemiNormSpec.commutator_max if v == "commutator_max" else SemiNormSpec.commutator_l2)(mats)
    if v in ("oscillator", "ornstein", "site_max"):
        dims = _get(obj, "site_dims", ptr)
        if not isinstance(dims, list) or not all(isinstance(d, int) and d >= 2 for d in dims):
            raise SpecError(f"{ptr}/site_dims", "expected a list of integers >= 2")
        return getattr(SemiNormSpec, v)(dims)
    raise SpecError(f"{ptr}/variant", f"unknown variant {v!r}")


def load_experiment(path, task, args):
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh, parse_float=Decimal)
    except OSError as e:
        raise SpecError("", f"cannot read spec file: {e}") from None
    except json.JSONDecodeError as e:
        raise SpecError("", f"invalid JSON: {e}") from None
    if not isinstance(raw, dict):
        raise SpecError("", "spec must be a JSON object")
    if "kind" in raw:
        return ExperimentSpec(task, raw, tol=args.tol, seed=args.seed, steps=args.steps or 6,
                              channel_ptr="")
    steps = args.steps if args.steps is not None else _get(raw, "steps", "", "int", 6)
    return ExperimentSpec(task, raw.get("channel"), raw.get("metric"), raw.get("states"),
                          {k: v for k, v in raw.items() if k not in ("channel", "metric", "states")},
                          args.tol, args.seed, steps)


# ---------------------------------------------------------------------------
# tasks


def _states(spec, d, count, rng, ptr="/states"):
    from .matcore import random_density, as_state
    if spec.states is None:
        return [random_density(d, rng) for _ in range(count)]
    if not isinstance(spec.states, list) or not spec.states:
        raise SpecError(ptr, "expected a non-empty list of matrices")
    out = []
    for i, s in enumerate(spec.states):
        M = parse_matrix(s, f"{ptr}/{i}")
        if M.shape != (d, d):
            raise SpecError(f"{ptr}/{i}", f"expected a {d}x{d} matrix")
        try:
            out.append(as_state(M).matrix)
        except QcurvError as e:
            raise SpecError(f"{ptr}/{i}", str(e)) from None
    return out


def _need_channel(spec):
    if spec.channel is None:
        raise SpecError("/channel", "missing required field")
    return build_channel(spec.channel, spec.channel_ptr)


def task_curvature(spec, rng):
    from . import curvature as cv
    from .channels import pauli_channel
    kind, obj = _need_channel(spec)
    budget = int(spec.options.get("budget", 10))
    if kind == "pauli":
        ch = pauli_channel(obj)
        sn = build_seminorm(spec.metric["seminorm"], "/metric/seminorm") if spec.metric else cv.pauli_seminorm(obj)
        rep = cv.lipschitz_factor(ch, sn, budget, pauli_spec=obj, rng=rng)
        return rep.to_dict(), 0
    if kind == "gibbs":
        ham, beta = obj
        r = cv.gibbs_contraction_certificate(ham, beta, rng=rng)
        out = {"kind": "gibbs_certificate", "kappa_bound": r["kappa"],
               "kappa_including_self": r["kappa_including_self"], "status": r["status"],
               "decay_ok": r["decay_ok"], "empirical_rate": r["empirical_rate"],
               "cb_norms": {str(k): v for k, v in r["cb_norms"].items()},
               "cb_methods": {str(k): v for k, v in r["cb_methods"].items()}}
        return out, 0 if r["decay_ok"] else 2
    if kind == "kraus":
        if not spec.metric:
            raise SpecError("/metric", "a semi-norm is required for a Kraus channel")
        sn = build_seminorm(spec.metric.get("seminorm"), "/metric/seminorm", obj.dim)
        rep = cv.lipschitz_factor(obj, sn, budget, rng=rng)
        return rep.to_dict(), 0
    if kind == "fermi_beam_splitter":
        from .cvmodels import clifford_generators, fermi_beam_splitter
        from .metrics import SemiNormSpec
        lam, n = obj
        ch, _ = fermi_beam_splitter(lam, n)
        sn = SemiNormSpec.commutator_max(list(clifford_generators(n).generators))
        rep = cv.lipschitz_factor(ch, sn, budget, rng=rng)
        d = rep.to_dict()
        d["expected_factor"] = math.sqrt(lam)
        return d, 0
    if kind == "bose_beam_splitter":
        from .cvmodels import bose_channel, fock_ops, sector_observable_basis, sector_projector
        from .matcore import random_density
        from .metrics import DerivationStructure
        N = obj.cutoff
        K = N // 2
        ch = bose_channel(obj)
        a, ad, _ = fock_ops(N)
        states = []
        for _ in range(int(spec.options.get("num_states", 8))):
            r = np.zeros((N + 1, N + 1), dtype=complex)
            r[:K + 1, :K + 1] = random_density(K + 1, rng)
            states.append(r)
        rep = cv.verify_ge(ch, DerivationStructure((a, ad)), states,
                           observable_basis=sector_observable_basis(N, K), support=sector_projector(N, K))
        d = rep.to_dict()
        d["expected_kappa"] = 1 - obj.lam
        return d, 0
    raise SpecError(f"{spec.channel_ptr}/kind", f"curvature is not available for {kind!r}")


def task_wasserstein(spec, rng):
    from .metrics import coupling_cost, singlet_projector, antisymmetric_projector, w1_dual
    if not spec.metric:
        raise SpecError("/metric", "missing required field")
    m = _get(spec.metric, "metric", "/metric", "str")
    if m == "w1":
        sn = build_seminorm(_get(spec.metric, "seminorm", "/metric"), "/metric/seminorm")
        d = sn.dim
    elif m == "coupling":
        cost = _get(spec.metric, "cost", "/metric", "str")
        if cost == "singlet_projector":
            C, d = singlet_projector(), 2
        elif cost == "antisymmetric_projector":
            d = _get(spec.metric, "dim", "/metric", "int")
            C = antisymmetric_projector(d)
        else:
            raise SpecError("/metric/cost", f"unknown cost {cost!r}")
    else:
        raise SpecError("/metric/metric", "expected 'w1' or 'coupling'")
    states = _states(spec, d, 2, rng)
    if len(states) != 2:
        raise SpecError("/states", "exactly two states are needed")
    if m == "w1":
        res = w1_dual(sn, states[0], states[1], tol=min(spec.tol, 1e-9))
        return res.to_dict(), 0
    return coupling_cost(C, states[0], states[1]).to_dict(), 0


def task_gap(spec, rng):
    from .curvature import spectral_gap, pauli_structural_factor
    from .channels import pauli_channel
    kind, obj = _need_channel(spec)
    if kind == "pauli":
        ch = pauli_channel(obj)
        d = 2 ** obj.n
        g = spectral_gap(ch, np.eye(d) / d)
        kappa = 1 - pauli_structural_factor(obj)
        ok = g >= kappa - 1e-9
        return {"gap": g, "kappa": kappa, "ok": ok}, 0 if ok else 2
    if kind == "kraus":
        omega = np.eye(obj.dim) / obj.dim
        if spec.options.get("omega") is not None:
            omega = parse_matrix(spec.options["omega"], "/omega")
        return {"gap": spectral_gap(obj, omega)}, 0
    raise SpecError(f"{spec.channel_ptr}/kind", f"gap is not available for {kind!r}")


def task_certify_tc(spec, rng):
    from .channels import site_replacement_expectation
    from .curvature import lipschitz_factor, tc_inequality_check
    from .metrics import SemiNormSpec
    kind, dims = _need_channel(spec)
    if kind != "site_replacement":
        raise SpecError(f"{spec.channel_ptr}/kind", "certify-tc needs a 'site_replacement' channel")
    n = len(dims)
    Es = [site_replacement_expectation(dims, i) for i in range(n)]
    sn = SemiNormSpec.oscillator(dims)
    P = sum(E.superop for E in Es) / n
    fac = lipschitz_factor(P, sn, 3, structural=(n - 1) / n, rng=rng)
    states = _states(spec, int(np.prod(dims)), int(spec.options.get("num_states", 5)), rng)
    reps = [tc_inequality_check(Es, sn, 1 / n, 1.0, r, factor=fac.lower_bound_factor, tol=spec.tol)
            for r in states]
    bad = [r for r in reps if r.status != "ok"]
    return {"factor": fac.to_dict(), "checks": [r.to_dict() for r in reps],
            "ok": not bad}, 0 if not bad else 2


def task_certify_ti(spec, rng):
    from .channels import depolarizing_generator, heat_bath_generator
    from .curvature import ti_inequality_check, local_ti_check, fit_decay_constant, _kms_gap
    from .metrics import DerivationStructure, SemiNormSpec, seminorm_eval
    from .matcore import random_hermitian
    kind, obj = _need_channel(spec)
    if kind == "depolarizing_semigroup":
        gen = depolarizing_generator()
        ds = DerivationStructure(tuple(v for v, _ in gen.jumps), sigma=gen.sigma)
        states = _states(spec, 2, int(spec.options.get("num_states", 5)), rng)
        reps = [ti_inequality_check(ds, gen, 1.0, 1.0, r) for r in states]
    elif kind == "gibbs":
        ham, beta = obj
        gen = heat_bath_generator(ham, beta)
        D = gen.dim
        orn = SemiNormSpec.ornstein(ham.dims)
        xs = [random_hermitian(D, rng) for _ in range(3)]
        kappa = _kms_gap(gen.superop, gen.sigma) / 2
        C = fit_decay_constant(gen, lambda x: seminorm_eval(orn, x), kappa, (0.1, 0.5, 1.0, 2.0), xs)
        states = _states(spec, D, int(spec.options.get("num_states", 2)), rng)
        reps = [local_ti_check(gen, C, kappa, r, xs=xs, rng=rng) for r in states]
    else:
        raise SpecError(f"{spec.channel_ptr}/kind", "certify-ti needs 'depolarizing_semigroup' or 'gibbs'")
    bad = [r for r in reps if r.status != "ok"]
    return {"checks": [r.to_dict() for r in reps], "ok": not bad}, 0 if not bad else 2


def task_mixing(spec, rng):
    kind, obj = _need_channel(spec)
    if kind == "pauli":
        from .curvature import pauli_mixing_check
        from .matcore import random_density
        states = _states(spec, 2 ** obj.n, 1, rng)
        res = pauli_mixing_check(obj, states[0], spec.steps)
        rows = [{"n": r["k"], "measured": r["measured"], "bound": r["bound"]} for r in res["rows"]]
        ok = res["ok"]
    elif kind == "bose_beam_splitter":
        from .cvmodels import mixing_table, bose_channel
        from .matcore import random_density
        N = obj.cutoff
        K = N // 2
        if spec.states is None:
            states = []
            for _ in range(2):
                r = np.zeros((N + 1, N + 1), dtype=complex)
                r[:K + 1, :K + 1] = random_density(K + 1, rng)
                states.append(r)
        else:
            states = _states(spec, N + 1, 2, rng)
        rows = mixing_table(obj, states[0], states[1], spec.steps, ch=bose_channel(obj))
        ok = all(r["measured"] <= r["bound"] + 1e-6 for r in rows)
    else:
        raise SpecError(f"{spec.channel_ptr}/kind", f"mixing is not available for {kind!r}")
    return {"rows": rows, "ok": ok}, 0 if ok else 2


def task_intertwine(spec, rng):
    kind, obj = _need_channel(spec)
    if kind == "bose_beam_splitter":
        from .cvmodels import bose_channel, bose_intertwining_residual, leakage, sector_projector
        ch = bose_channel(obj)
        N = obj.cutoff
        res = bose_intertwining_residual(obj, ch, N // 2)
        e = np.zeros((N + 1, N + 1), dtype=complex)
        e[N // 2, N // 2] = 1
        return {"residual": res, "factor": math.sqrt(obj.lam), "leakage_top": leakage(ch, e)}, 0
    if kind == "fermi_beam_splitter":
        from .cvmodels import fermi_beam_splitter
        lam, n = obj
        _, rep = fermi_beam_splitter(lam, n)
        return {k: float(v) for k, v in rep.items() if np.isscalar(v)}, 0
    if kind == "pauli":
        from .channels import pauli_channel, pauli_matrix
        from .curvature import pauli_hat_maps, verify_intertwining
        from .metrics import DerivationStructure
        gens = tuple(pauli_matrix(s) for s, _ in obj.terms if s != "I" * obj.n)
        if not gens:
            return {"residual": 0.0}, 0
        ds = DerivationStructure(gens)
        out = verify_intertwining(pauli_channel(obj), ds, pauli_hat_maps(obj))
        return {"residual": out["residual"]}, 0
    raise SpecError(f"{spec.channel_ptr}/kind", f"intertwine is not available for {kind!r}")


_TASKS = {"curvature": task_curvature, "wasserstein": task_wasserstein, "gap": task_gap,
          "certify-tc": task_certify_tc, "certify-ti": task_certify_ti, "mixing": task_mixing,
          "intertwine": task_intertwine}


# ---------------------------------------------------------------------------
# output


def _clean(v):
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return {"status": "infinite"}
        if math.isnan(v):
            return None
        return v
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, complex):
        return [v.real, v.imag]
    return v


def render_json(report):
    return json.dumps(_clean(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _flatten(prefix, v, out):
    if isinstance(v, dict):
        for k in sorted(v):
            _flatten(f"{prefix}.{k}" if prefix else str(k), v[k], out)
    elif isinstance(v, list):
        for i, x in enumerate(v):
            _flatten(f"{prefix}.{i}", x, out)
    else:
        out.append((prefix, v))


def render_csv(report):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    result = _clean(report["result"])
    rows = result.get("rows") if isinstance(result, dict) else None
    if rows and all(isinstance(r, dict) for r in rows):
        cols = sorted({k for r in rows for k in r}, key=lambda k: (k != "n", k))
        w.writerow(cols)
        for r in rows:
            w.writerow([json.dumps(r.get(c)) if isinstance(r.get(c), dict) else r.get(c) for c in cols])
    else:
        w.writerow(["key", "value"])
        flat = []
        _flatten("", result, flat)
        for k, v in flat:
            w.writerow([k, v])
    return buf.getvalue()


def build_parser():
    p = argparse.ArgumentParser(prog="qcurv", description="Curvature certificates for quantum channels.")
    p.add_argument("task", choices=TASKS)
    p.add_argument("--spec", required=True, help="JSON experiment or channel file")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--steps", type=int, default=None, help="number of steps for mixing tables")
    return p


def run(args):
    """Run one task; returns ``(exit_code, text)``."""
    spec = load_experiment(args.spec, args.task, args)
    rng = np.random.default_rng(spec.seed)
    result, code = _TASKS[args.task](spec, rng)
    report = {"version": __version__, "task": args.task, "seed": spec.seed, "tol": spec.tol,
              "result": result}
    text = render_json(report) if args.format == "json" else render_csv(report)
    return code, text


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 1 if e.code else 0
    try:
        code, text = run(args)
    except SpecError as e:
        sys.stderr.write(json.dumps({"error": "spec", "pointer": e.pointer or "/",
                                     "message": str(e)}, sort_keys=True) + "\n")
        return 1
    except QcurvError as e:
        sys.stderr.write(json.dumps({"error": type(e).__name__, "message": str(e)}, sort_keys=True) + "\n")
        return 1
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as e:
            sys.stderr.write(f"cannot write {args.out}: {e}\n")
            return 1
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
