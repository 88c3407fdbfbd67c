"""Verification campaigns: config parsing, deterministic sampling, checks, reports.

A campaign is a JSON document with the keys ``suite``, ``scenarios``,
``lagrangians``, ``samples``, ``seed``, ``tolerance`` and ``box`` (plus the
optional hierarchy keys ``order`` and ``mix``).  Every random draw comes from
numpy's PCG64 generator seeded through ``SeedSequence(seed, spawn_key=...)``,
so a report is a pure function of the config and the package version.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .errors import ConfigError, DegenerateFit, DomainError, NoConvergence, Singular, VanishingDenominator, VarsolError
from .firstorder import antisym_defect, du_scale, ratios, simple_defect, sym_defect
from .hierarchy import HierarchyOrder, generic_residual, universal_field_residual
from .implicit import FamilySpec, FieldSample, constraint_residual, sample_field
from .lagrangian import TINY, LagrangianSpec, companion, cone_lagrangian, el_residual, lagrangian_jet
from .multifield import (
    MultiFamilySpec,
    MultiFieldSample,
    MultiLagrangianSpec,
    constraint_jacobian,
    constraint_residuals,
    jacobian_companion,
    multi_jet,
    multifield_el_residual,
    orthogonality_derivative_defect,
    sample_multifield,
    structure_defect,
)
from .pools import phi_dependent_lagrangian, projective_multifamily, random_family, random_kernel, random_multifamily
from .pools import rational_lagrangian, weight_one_pool
from .version import __version__

SUITES = ("single", "multi", "hierarchy", "firstorder", "homogeneity")
SUITE_CHOICES = SUITES + ("all",)
TOP_LEVEL_KEYS = {"suite", "scenarios", "lagrangians", "samples", "seed", "tolerance", "box", "order", "mix"}

DEFAULT_BOX = (0.5, 1.5)
MAX_ATTEMPTS = 20
CAUSTIC_FACTOR = 0.1
MAX_MULTI_COND = 1e6
MIN_RANK_RATIO = 1e-6
FLAG_SKIP_FRACTION = 0.5

# None marks an informational check: recorded, never failed.
DEFAULT_TOLERANCES: dict[str, float | None] = {
    "constraint": 1e-12,
    "weight_one_defect": 1e-12,
    "hessian_nullvector": 1e-10,
    "el_residual": 1e-8,
    "hierarchy": 1e-7,
    "universal_field": 1e-8,
    "sym_defect": 1e-8,
    "antisym_defect": 1e-8,
    "simple_defect": 1e-8,
    "multi_constraint": 1e-12,
    "orthogonality": 1e-10,
    "eq10": 1e-9,
    "multifield_el": 1e-7,
    "structure": None,
}

SINGLE_BUILTINS = ("companion", "lorentz", "rational", "phi_companion", "cone", "pool")
MULTI_BUILTINS = ("jacobian_companion",)

MIXED_NOTE = "mixed iteration evaluated as the generic contraction with distinct Hessian factors"

# spawn-key streams, kept apart so adding samples never changes generated specs
_SCENARIO_STREAM = 1
_LAGRANGIAN_STREAM = 2
_SAMPLE_STREAM = 3


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def base_check(name: str) -> str:
    return name.split("[", 1)[0]


# --------------------------------------------------------------------------
# config


@dataclass
class Scenario:
    id: str
    spec: FamilySpec | MultiFamilySpec
    box: np.ndarray  # (n, 2)
    lagrangians: tuple[LagrangianSpec, ...] = ()
    multi_lagrangians: tuple[MultiLagrangianSpec, ...] = ()
    mixed: tuple[LagrangianSpec, ...] | None = None

    @property
    def multi(self) -> bool:
        return isinstance(self.spec, MultiFamilySpec)

    @property
    def n(self) -> int:
        return self.spec.n

    def to_dict(self) -> dict:
        d = {"id": self.id, "kind": "multi" if self.multi else "single", "spec": self.spec.to_dict()}
        d["box"] = self.box.tolist()
        d["lagrangians"] = [L.to_dict() for L in self.lagrangians + self.multi_lagrangians]
        return d


@dataclass
class Campaign:
    suite: str
    scenarios: list[Scenario]
    samples: int
    seed: int
    tolerance: dict[str, float | None] = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    order: int | None = None

    @property
    def suites(self) -> tuple[str, ...]:
        return SUITES if self.suite == "all" else (self.suite,)

    def to_dict(self) -> dict:
        return {
            "suite": self.suite,
            "samples": self.samples,
            "seed": self.seed,
            "order": self.order,
            "tolerance": dict(sorted(self.tolerance.items())),
            "scenarios": [s.to_dict() for s in self.scenarios],
        }


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def _parse_box(raw: Any, n: int, where: str) -> np.ndarray:
    try:
        arr = np.asarray(raw, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: box must be [lo, hi] or a list of [lo, hi] pairs") from None
    if arr.shape == (2,):
        arr = np.tile(arr, (n, 1))
    _require(arr.shape == (n, 2), f"{where}: box needs one [lo, hi] pair or {n} of them, got shape {arr.shape}")
    _require(bool(np.all(np.isfinite(arr))), f"{where}: box bounds must be finite")
    _require(bool(np.all(arr[:, 0] < arr[:, 1])), f"{where}: every box interval must satisfy lo < hi")
    return arr


def _single_from_entry(entry: dict, where: str) -> FamilySpec:
    try:
        bracket = entry.get("bracket")
        return FamilySpec(tuple(entry["F"]), float(entry["c"]), tuple(bracket) if bracket else None, entry.get("guess"))
    except KeyError as exc:
        raise ConfigError(f"{where}: missing key {exc}") from None
    except (VarsolError, ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _multi_from_entry(entry: dict, where: str) -> MultiFamilySpec:
    try:
        spec = MultiFamilySpec(tuple(tuple(row) for row in entry["F"]), tuple(entry["c"]), entry.get("guess"))
    except KeyError as exc:
        raise ConfigError(f"{where}: missing key {exc}") from None
    except (VarsolError, ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from None
    for key, actual in (("m", spec.m), ("n", spec.n)):
        if key in entry:
            _require(entry[key] == actual, f"{where}: declared {key}={entry[key]} but F has {key}={actual}")
    return spec


def _expand_scenarios(raw: Any, seed: int) -> list[tuple[str, FamilySpec | MultiFamilySpec, Any]]:
    _require(isinstance(raw, list) and raw, "scenarios must be a non-empty list")
    out = []
    for idx, entry in enumerate(raw):
        where = f"scenarios[{idx}]"
        _require(isinstance(entry, dict), f"{where}: must be an object")
        box = entry.get("box")
        gen = entry.get("generate")
        if gen is None:
            is_multi = "m" in entry or (isinstance(entry.get("F"), list) and entry["F"] and isinstance(entry["F"][0], list))
            spec = _multi_from_entry(entry, where) if is_multi else _single_from_entry(entry, where)
            out.append((str(entry.get("id", f"s{idx}")), spec, box))
            continue
        count = entry.get("count", 1)
        _require(isinstance(count, int) and count >= 1, f"{where}: count must be a positive integer")
        ns = entry.get("n", 2)
        ns = ns if isinstance(ns, list) else [ns]
        _require(all(isinstance(n, int) and n >= 2 for n in ns), f"{where}: n must be integers >= 2")
        rng = _rng(seed, _SCENARIO_STREAM, idx)
        prefix = entry.get("id", f"g{idx}")
        if gen == "single":
            for n in ns:
                for k in range(count):
                    out.append((f"{prefix}-n{n}-f{k + 1}", random_family(rng, n), box))
        elif gen in ("multi", "projective"):
            m = entry.get("m", 2)
            _require(isinstance(m, int) and 1 <= m, f"{where}: m must be a positive integer")
            make = random_multifamily if gen == "multi" else projective_multifamily
            for n in ns:
                _require(n >= m, f"{where}: need n >= m for a nondegenerate gradient")
                for k in range(count):
                    out.append((f"{prefix}-m{m}n{n}-f{k + 1}", make(rng, m, n), box))
        else:
            raise ConfigError(f"{where}: generate must be 'single', 'multi' or 'projective', got {gen!r}")
    ids = [sid for sid, _, _ in out]
    dup = sorted({i for i in ids if ids.count(i) > 1})
    _require(not dup, f"duplicate scenario ids {dup}")
    return out


@dataclass
class _LagrangianEntry:
    name: str | None = None  # builtin
    spec: LagrangianSpec | MultiLagrangianSpec | None = None
    index: int = 0


def _parse_lagrangians(raw: Any) -> list[_LagrangianEntry]:
    _require(isinstance(raw, list), "lagrangians must be a list")
    out = []
    for idx, entry in enumerate(raw):
        where = f"lagrangians[{idx}]"
        if isinstance(entry, dict) and "body" not in entry and "label" in entry:
            entry = entry["label"]
        if isinstance(entry, str):
            _require(
                entry in SINGLE_BUILTINS + MULTI_BUILTINS,
                f"{where}: unknown built-in {entry!r}; choose from {', '.join(SINGLE_BUILTINS + MULTI_BUILTINS)}",
            )
            out.append(_LagrangianEntry(name=entry, index=idx))
            continue
        _require(isinstance(entry, dict), f"{where}: must be a built-in name or an object with n and body")
        try:
            if "m" in entry:
                spec = MultiLagrangianSpec(int(entry["m"]), int(entry["n"]), entry["body"], entry.get("label", ""))
            else:
                spec = LagrangianSpec(int(entry["n"]), entry["body"], entry.get("label", ""))
        except KeyError as exc:
            raise ConfigError(f"{where}: missing key {exc}") from None
        except (VarsolError, ValueError, TypeError) as exc:
            raise ConfigError(f"{where}: {exc}") from None
        out.append(_LagrangianEntry(spec=spec, index=idx))
    return out


def _resolve_single(entries: list[_LagrangianEntry], n: int, seed: int) -> list[LagrangianSpec]:
    out: list[LagrangianSpec] = []
    for e in entries:
        if e.spec is not None:
            if isinstance(e.spec, LagrangianSpec) and e.spec.n == n:
                out.append(e.spec)
            continue
        rng = _rng(seed, _LAGRANGIAN_STREAM, e.index, n)
        if e.name == "companion":
            out.append(companion(n))
        elif e.name == "lorentz":
            out.append(companion(n, [1] * (n - 1) + [-1]))
        elif e.name == "rational":
            out.append(rational_lagrangian(n))
        elif e.name == "phi_companion":
            out.append(phi_dependent_lagrangian(n))
        elif e.name == "cone":
            out.append(cone_lagrangian(n, random_kernel(rng, n), "cone"))
        elif e.name == "pool":
            out.extend(weight_one_pool(n, rng))
    seen: dict[str, LagrangianSpec] = {}
    for L in out:
        seen.setdefault(L.label, L)
    return list(seen.values())


def _resolve_multi(entries: list[_LagrangianEntry], m: int, n: int) -> list[MultiLagrangianSpec]:
    out: list[MultiLagrangianSpec] = []
    for e in entries:
        if e.name == "jacobian_companion":
            out.append(jacobian_companion(m, n))
        elif isinstance(e.spec, MultiLagrangianSpec) and (e.spec.m, e.spec.n) == (m, n):
            out.append(e.spec)
    seen: dict[str, MultiLagrangianSpec] = {}
    for L in out:
        seen.setdefault(L.label, L)
    return list(seen.values())


def _parse_tolerance(raw: Any) -> dict[str, float | None]:
    tol = dict(DEFAULT_TOLERANCES)
    if raw is None:
        return tol
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        _require(raw > 0, "a global tolerance must be positive")
        return {k: (None if v is None else float(raw)) for k, v in tol.items()}
    _require(isinstance(raw, dict), "tolerance must be a number or an object of per-check values")
    for key, value in raw.items():
        _require(key in tol, f"unknown tolerance key {key!r}; known: {', '.join(sorted(tol))}")
        if value is not None:
            _require(isinstance(value, (int, float)) and value > 0, f"tolerance {key!r} must be positive or null")
            value = float(value)
        tol[key] = value
    return tol


def parse_campaign(data: Any) -> Campaign:
    """Validate a decoded JSON config; every problem raises ConfigError."""
    _require(isinstance(data, dict), "config must be a JSON object")
    unknown = set(data) - TOP_LEVEL_KEYS
    _require(not unknown, f"unknown config keys {sorted(unknown)}")
    suite = data.get("suite", "all")
    _require(suite in SUITE_CHOICES, f"suite must be one of {', '.join(SUITE_CHOICES)}, got {suite!r}")
    samples = data.get("samples", 10)
    _require(isinstance(samples, int) and not isinstance(samples, bool) and samples >= 1, "samples must be an integer >= 1")
    seed = data.get("seed", 0)
    _require(
        isinstance(seed, int) and not isinstance(seed, bool) and 0 <= seed < 2**64,
        "seed must be an integer in [0, 2^64)",
    )
    tolerance = _parse_tolerance(data.get("tolerance"))
    order = data.get("order")
    _require(order is None or (isinstance(order, int) and order >= 0), "order must be a non-negative integer")
    entries = _parse_lagrangians(data.get("lagrangians", ["companion"]))
    mix = data.get("mix")
    _require(mix is None or (isinstance(mix, list) and all(isinstance(v, str) for v in mix)), "mix must be a list of labels")
    default_box = data.get("box", list(DEFAULT_BOX))

    scenarios = []
    for sid, spec, box in _expand_scenarios(data.get("scenarios"), seed):
        where = f"scenario {sid!r}"
        b = _parse_box(default_box if box is None else box, spec.n, where)
        if isinstance(spec, MultiFamilySpec):
            sc = Scenario(sid, spec, b, multi_lagrangians=tuple(_resolve_multi(entries, spec.m, spec.n)))
        else:
            Ls = _resolve_single(entries, spec.n, seed)
            mixed = None
            if mix:
                by_label = {L.label: L for L in Ls}
                missing = [lab for lab in mix if lab not in by_label]
                _require(not missing, f"{where}: mix labels {missing} do not resolve; available {sorted(by_label)}")
                mixed = tuple(by_label[lab] for lab in mix)
            sc = Scenario(sid, spec, b, lagrangians=tuple(Ls), mixed=mixed)
        if order is not None and not sc.multi:
            _require(order <= spec.n - 1, f"{where}: order {order} exceeds n-1 = {spec.n - 1}")
        scenarios.append(sc)
    return Campaign(suite, scenarios, samples, seed, tolerance, order)


def load_campaign(path: str, overrides: dict | None = None) -> Campaign:
    try:
        with open(path, "rb") as fh:
            data = json.loads(fh.read().decode("utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from None
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"config {path!r} is not valid JSON: {exc}") from None
    if overrides:
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        data = {**data, **{k: v for k, v in overrides.items() if v is not None}}
    return parse_campaign(data)


# --------------------------------------------------------------------------
# sampling


def draw_single(rng: np.random.Generator, sc: Scenario) -> tuple[FieldSample | None, str | None]:
    """Draw a point in the box and solve there, resampling near caustics.

    A point is rejected when ``|D| < 0.1 max(1, max|F| |x|)`` or when the
    solver reports a singular or failed solve.  Returns the sample, or None
    with the tag of the last rejection after MAX_ATTEMPTS draws.
    """
    lo, hi = sc.box[:, 0], sc.box[:, 1]
    tag = None
    for _ in range(MAX_ATTEMPTS):
        x = rng.uniform(lo, hi)
        try:
            s = sample_field(sc.spec, x)
        except (Singular, NoConvergence, DomainError) as exc:
            tag = type(exc).__name__
            continue
        fmax = float(np.max(np.abs(s.grad))) * abs(s.denom)  # |F^j| = |phi_j D|
        if abs(s.denom) < CAUSTIC_FACTOR * max(1.0, fmax * float(np.linalg.norm(x))):
            tag = "caustic"
            continue
        return s, None
    return None, tag


def draw_multi(rng: np.random.Generator, sc: Scenario) -> tuple[MultiFieldSample | None, str | None]:
    """Multifield analogue of :func:`draw_single`.

    Rejects points whose constraint Jacobian has condition number above
    MAX_MULTI_COND and points whose gradient matrix is close to rank deficient.
    """
    lo, hi = sc.box[:, 0], sc.box[:, 1]
    tag = None
    for _ in range(MAX_ATTEMPTS):
        x = rng.uniform(lo, hi)
        try:
            s = sample_multifield(sc.spec, x)
            cond = float(np.linalg.cond(constraint_jacobian(sc.spec, x, s.phi)))
        except (Singular, NoConvergence, DomainError) as exc:
            tag = type(exc).__name__
            continue
        if not cond < MAX_MULTI_COND:
            tag = "caustic"
            continue
        sv = np.linalg.svd(s.grad, compute_uv=False)
        if not sv[-1] > MIN_RANK_RATIO * sv[0]:
            tag = "rank_deficient"
            continue
        return s, None
    return None, tag


# --------------------------------------------------------------------------
# checks

Check = tuple[str, Callable[[], tuple[float, float]], str | None]


def _homogeneity_checks(L: LagrangianSpec, s: FieldSample) -> list[Check]:
    def jet():
        return lagrangian_jet(L, s.grad, s.phi)

    def weight():
        j = jet()
        raw = float(np.dot(s.grad, j.dg) - j.value)
        return raw, abs(raw) / (abs(j.value) + TINY)

    def nullvec():
        j = jet()
        v = j.M @ s.grad
        raw = float(np.linalg.norm(v))
        return raw, raw / (float(np.linalg.norm(j.M)) * float(np.linalg.norm(s.grad)) + TINY)

    return [
        (f"weight_one_defect[{L.label}]", weight, None),
        (f"hessian_nullvector[{L.label}]", nullvec, None),
    ]


def _single_checks(c: Campaign, sc: Scenario, s: FieldSample, suite: str) -> list[Check]:
    checks: list[Check] = []
    if suite == "single":
        def constraint():
            raw = constraint_residual(sc.spec, s.x, s.phi)
            return raw, abs(raw) / max(1.0, abs(sc.spec.c))

        checks.append(("constraint", constraint, None))
        for L in sc.lagrangians:
            checks.extend(_homogeneity_checks(L, s))
            checks.append((f"el_residual[{L.label}]", lambda L=L: tuple(el_residual(L, s)), None))
    elif suite == "homogeneity":
        for L in sc.lagrangians:
            checks.extend(_homogeneity_checks(L, s))
    elif suite == "hierarchy":
        orders = range(s.n) if c.order is None else [c.order]
        for r in orders:
            for L in sc.lagrangians:
                order = HierarchyOrder.repeated(r, L)
                checks.append((f"hierarchy[r={r},{L.label}]", lambda o=order: tuple(generic_residual(o, s)), None))
            if r >= 1:
                pool = sc.mixed if sc.mixed is not None else sc.lagrangians
                if len({L.label for L in pool}) >= 2:
                    Ls = tuple(pool[a % len(pool)] for a in range(r + 1))
                    order = HierarchyOrder(r, Ls)
                    checks.append((f"hierarchy[r={r},mixed]", lambda o=order: tuple(generic_residual(o, s)), MIXED_NOTE))
        checks.append(("universal_field", lambda: tuple(universal_field_residual(s)), None))
    elif suite == "firstorder":
        n = s.n
        for j in range(1, n):
            for k in range(1, n):
                if j <= k:
                    checks.append((f"sym_defect[{j},{k}]", lambda j=j, k=k: tuple(sym_defect(s, j, k)), None))
                if j < k:
                    def anti(j=j, k=k):
                        rs = ratios(s)
                        raw = antisym_defect(rs, j, k)
                        scale = float(np.linalg.norm(rs.u)) * (float(np.linalg.norm(rs.du)) + du_scale(s))
                        return raw, abs(raw) / (scale + TINY)

                    checks.append((f"antisym_defect[{j},{k}]", anti, None))
                checks.append((f"simple_defect[{j},{k}]", lambda j=j, k=k: tuple(simple_defect(s, j, k)), None))
    return checks


def _multi_checks(sc: Scenario, s: MultiFieldSample) -> list[Check]:
    def constraint():
        res = constraint_residuals(sc.spec, s.x, s.phi)
        raw = float(np.max(np.abs(res)))
        return raw, raw / max(1.0, max(abs(v) for v in sc.spec.c))

    checks: list[Check] = [("multi_constraint", constraint, None)]
    for L in sc.multi_lagrangians:
        def ortho(L=L):
            jet = multi_jet(L, s.grad)
            D = s.grad @ jet.dL.T - np.eye(L.m) * jet.value
            raw = float(np.max(np.abs(D)))
            return raw, raw / (abs(jet.value) + TINY)

        def eq10(L=L):
            jet = multi_jet(L, s.grad)
            raw = float(np.max(np.abs(orthogonality_derivative_defect(L, s.grad))))
            return raw, raw / (float(np.linalg.norm(jet.hess)) + TINY)

        checks.append((f"orthogonality[{L.label}]", ortho, None))
        checks.append((f"eq10[{L.label}]", eq10, None))
        for a in range(L.m):
            checks.append(
                (f"multifield_el[{L.label},a={a + 1}]", lambda L=L, a=a: tuple(multifield_el_residual(L, s)[a]), None)
            )

    def structure():
        v = structure_defect(s)
        return v, v

    checks.append(("structure", structure, None))
    return checks


# --------------------------------------------------------------------------
# report


def _clean(v: float | None) -> float | None:
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


@dataclass
class VerificationReport:
    records: list[dict]
    summary: dict

    @property
    def exit_code(self) -> int:
        return int(self.summary["exit_code"])

    def to_json(self) -> str:
        return json.dumps({"records": self.records, "summary": self.summary}, sort_keys=True, indent=1, allow_nan=False) + "\n"

    def failures(self) -> list[dict]:
        return [r for r in self.records if r["status"] == "fail"]


def _record(suite, sid, idx, x, check, raw, norm, tol, status, error=None, note=None) -> dict:
    rec = {
        "suite": suite,
        "scenario": sid,
        "sample": idx,
        "x": None if x is None else [float(v) for v in x],
        "check": check,
        "raw": _clean(raw),
        "normalized": _clean(norm),
        "tolerance": tol,
        "status": status,
        "error": error,
    }
    if note:
        rec["note"] = note
    return rec


def _run_check(c: Campaign, suite: str, sid: str, idx: int, x, check: Check) -> dict:
    name, fn, note = check
    tol = c.tolerance.get(base_check(name))
    try:
        raw, norm = fn()
    except (DomainError, VanishingDenominator, DegenerateFit, Singular) as exc:
        return _record(suite, sid, idx, x, name, None, None, tol, "skipped", type(exc).__name__, note)
    if not (math.isfinite(raw) and math.isfinite(norm)):
        return _record(suite, sid, idx, x, name, raw, norm, tol, "fail", "nonfinite", note)
    if tol is None:
        status = "info"
    else:
        status = "pass" if norm <= tol else "fail"
    return _record(suite, sid, idx, x, name, raw, norm, tol, status, None, note)


def _applies(suite: str, sc: Scenario) -> bool:
    return (suite == "multi") == sc.multi


def run_campaign(c: Campaign) -> VerificationReport:
    """Run every selected suite over every applicable scenario.

    Sample points are drawn once per scenario and shared by the suites, so
    the records of different suites refer to the same x.
    """
    records: list[dict] = []
    for sidx, sc in enumerate(c.scenarios):
        suites = [s for s in c.suites if _applies(s, sc)]
        if not suites:
            continue
        rng = _rng(c.seed, _SAMPLE_STREAM, sidx)
        draw = draw_multi if sc.multi else draw_single
        for idx in range(c.samples):
            s, tag = draw(rng, sc)
            if s is None:
                for suite in suites:
                    records.append(_record(suite, sc.id, idx, None, "sample", None, None, None, "skipped", tag))
                continue
            for suite in suites:
                checks = _multi_checks(sc, s) if sc.multi else _single_checks(c, sc, s, suite)
                records.extend(_run_check(c, suite, sc.id, idx, s.x, ch) for ch in checks)
    records.sort(key=lambda r: (r["scenario"], r["sample"], r["check"], r["suite"]))
    return VerificationReport(records, summarize(c, records))


def summarize(c: Campaign, records: Sequence[dict]) -> dict:
    counts = {"total": len(records), "pass": 0, "fail": 0, "skipped": 0, "info": 0}
    max_norm: dict[str, float] = {}
    failed: set[str] = set()
    per: dict[str, dict] = {}
    notes: set[str] = set()
    for r in records:
        counts[r["status"]] += 1
        sc = per.setdefault(r["scenario"], {"records": 0, "skipped": 0})
        sc["records"] += 1
        if r["status"] == "skipped":
            sc["skipped"] += 1
            continue
        base = base_check(r["check"])
        if r["normalized"] is not None:
            max_norm[base] = max(max_norm.get(base, 0.0), r["normalized"])
        if r["status"] == "fail":
            failed.add(base)
        if "note" in r:
            notes.add(r["note"])
    flagged = []
    for sid, sc in per.items():
        sc["skip_fraction"] = sc["skipped"] / sc["records"]
        sc["flagged"] = sc["skip_fraction"] >= FLAG_SKIP_FRACTION
        if sc["flagged"]:
            flagged.append(sid)
    if counts["fail"]:
        code = 1
    elif flagged or counts["total"] == 0:
        code = 3
    else:
        code = 0
    return {
        "version": __version__,
        "generator": "numpy PCG64 via SeedSequence(seed, spawn_key)",
        "seed": c.seed,
        "suite": c.suite,
        "samples": c.samples,
        "counts": counts,
        "max_normalized": dict(sorted(max_norm.items())),
        "failed_checks": sorted(failed),
        "scenarios": dict(sorted(per.items())),
        "flagged": sorted(flagged),
        "notes": sorted(notes),
        "exit_code": code,
        "campaign": c.to_dict(),
    }


def format_table(report: VerificationReport) -> str:
    """Human-readable per-check summary."""
    rows: dict[tuple[str, str], dict] = {}
    for r in report.records:
        key = (r["suite"], base_check(r["check"]))
        row = rows.setdefault(key, {"pass": 0, "fail": 0, "skipped": 0, "info": 0, "max": None, "tol": r["tolerance"]})
        row[r["status"]] += 1
        if r["normalized"] is not None:
            row["max"] = r["normalized"] if row["max"] is None else max(row["max"], r["normalized"])
    header = f"{'suite':<12} {'check':<20} {'pass':>6} {'fail':>6} {'skip':>6} {'info':>6} {'max norm':>11} {'tol':>9}"
    lines = [header, "-" * len(header)]
    for (suite, check), row in sorted(rows.items()):
        mx = "-" if row["max"] is None else f"{row['max']:.3e}"
        tol = "-" if row["tol"] is None else f"{row['tol']:.0e}"
        lines.append(
            f"{suite:<12} {check:<20} {row['pass']:>6} {row['fail']:>6} {row['skipped']:>6} {row['info']:>6} {mx:>11} {tol:>9}"
        )
    s = report.summary
    lines.append("-" * len(header))
    counts = s["counts"]
    lines.append(
        f"total {counts['total']}  pass {counts['pass']}  fail {counts['fail']}  "
        f"skipped {counts['skipped']}  info {counts['info']}  seed {s['seed']}"
    )
    if s["flagged"]:
        lines.append("flagged scenarios (skip fraction >= 50%): " + ", ".join(s["flagged"]))
    for note in s["notes"]:
        lines.append(f"note: {note}")
    return "\n".join(lines)
