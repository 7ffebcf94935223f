"""Convergence experiments: presets, execution and table output."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .dg import (
    DiracSource,
    InitialDirac,
    InitialFunction,
    PowerLaw,
    ProblemData,
    SeparableSource,
    ZeroInitial,
    ZeroSource,
    solve,
)
from .errors import DomainError, FracDGError
from .frac_ops import TimeGrid
from .metrics import ErrorReport, ErrorRow, e1_l2l2, e2_fractional, nodal_error, observed_orders
from .reference import fine_reference, space_for_level

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = logging.getLogger(__name__)

NORMS = ("e1", "e2", "nodal")
AXES = ("tau", "h")

# {{{ data cases


@dataclass(frozen=True)
class CustomCase:
    """Power-law or Dirac data assembled from parameters.

    ``initial`` is one of ``zero``, ``power`` (``x^initial_exponent``, 1D),
    ``sine`` (first eigenmode, 1D) or ``dirac``; ``source`` is one of
    ``zero``, ``power`` (``x^space_exponent t^time_exponent``, 1D) or
    ``dirac`` (``t^time_exponent`` at ``point``).
    """

    initial: str = "zero"
    initial_exponent: float = 0.0
    source: str = "zero"
    space_exponent: float = 0.0
    time_exponent: float = 0.0
    point: tuple = (0.5,)

    def __post_init__(self) -> None:
        if self.initial not in ("zero", "power", "sine", "dirac"):
            raise DomainError(f"unknown initial kind {self.initial!r}")
        if self.source not in ("zero", "power", "dirac"):
            raise DomainError(f"unknown source kind {self.source!r}")
        object.__setattr__(self, "point", tuple(float(p) for p in self.point))

    def build(self, alpha: float, T: float, dim: int) -> ProblemData:
        if dim != 1 and "power" in (self.initial, self.source):
            raise DomainError("power-law data are defined on the interval only")
        if len(self.point) != dim and "dirac" in (self.initial, self.source):
            raise DomainError(f"Dirac point must have {dim} coordinates")
        q = self.initial_exponent
        initial = {
            "zero": lambda: ZeroInitial(),
            "power": lambda: InitialFunction(lambda x: x**q, q if q < 0 else 0.0),
            "sine": lambda: InitialFunction(_first_mode),
            "dirac": lambda: InitialDirac(self.point),
        }[self.initial]()
        p, r = self.space_exponent, self.time_exponent
        source = {
            "zero": lambda: ZeroSource(),
            "power": lambda: SeparableSource(PowerLaw(r), lambda x: x**p, p if p < 0 else 0.0),
            "dirac": lambda: DiracSource(self.point, PowerLaw(r)),
        }[self.source]()
        return ProblemData(alpha, T, initial, source)


def _first_mode(x):
    return np.sin(np.pi * x)


CASES = {
    "f-x049": CustomCase(source="power", space_exponent=-0.49, time_exponent=-0.49),
    "f-x099": CustomCase(source="power", space_exponent=-0.99, time_exponent=-0.49),
    "u0-x049": CustomCase(initial="power", initial_exponent=-0.49),
    "f-dirac": CustomCase(source="dirac", time_exponent=-0.49, point=(0.5, 0.5)),
    "u0-dirac": CustomCase(initial="dirac", point=(0.5, 0.5)),
}

# }}}

# {{{ specs


@dataclass(frozen=True)
class Expectation:
    """Window ``[lo, hi]`` for the mean of the last two observed orders of ``metric``."""

    metric: str
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if self.metric not in NORMS:
            raise DomainError(f"unknown metric {self.metric!r}")
        if not self.lo <= self.hi:
            raise DomainError("expectation window must satisfy lo <= hi")


@dataclass(frozen=True)
class ExperimentSpec:
    """One convergence sweep.

    ``ladder`` lists dyadic levels ``k`` (``h`` or ``tau`` equal to ``2^-k``)
    along ``axis``; the other parameter is held at ``2^-fixed_level``.
    ``reference`` gives the ``(h, tau)`` levels of the fine reference run.
    ``beta`` records the regularity index of the data driving the expected
    rates.
    """

    name: str
    dim: int
    case: str
    axis: str
    ladder: tuple
    fixed_level: int
    reference: tuple
    alpha: float = 0.4
    T: float = 1.0
    norms: tuple = ("e1",)
    expectations: tuple = ()
    beta: float = 0.0
    table: str = ""
    description: str = ""
    desk: bool = False
    custom: CustomCase | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "ladder", tuple(int(k) for k in self.ladder))
        object.__setattr__(self, "reference", tuple(int(k) for k in self.reference))
        object.__setattr__(self, "norms", tuple(self.norms))
        object.__setattr__(self, "expectations", tuple(
            e if isinstance(e, Expectation) else Expectation(*e) for e in self.expectations))
        if self.dim not in (1, 2):
            raise DomainError(f"dimension must be 1 or 2, got {self.dim}")
        if self.axis not in AXES:
            raise DomainError(f"axis must be one of {AXES}, got {self.axis!r}")
        if self.case != "custom" and self.case not in CASES:
            raise DomainError(f"unknown data case {self.case!r}")
        if self.case == "custom" and self.custom is None:
            raise DomainError("custom case needs its parameters")
        if not set(self.norms) <= set(NORMS) or not self.norms:
            raise DomainError(f"norms must be a nonempty subset of {NORMS}")
        if any(b <= a for a, b in zip(self.ladder, self.ladder[1:])):
            raise DomainError("ladder must be strictly increasing in refinement")
        if len(self.reference) != 2:
            raise DomainError("reference must be an (h_level, tau_level) pair")
        h_ref, tau_ref = self.reference
        along, other = (tau_ref, h_ref) if self.axis == "tau" else (h_ref, tau_ref)
        if self.ladder and max(self.ladder) >= along:
            raise DomainError("reference must be strictly finer than every ladder level")
        if self.fixed_level > other:
            raise DomainError("fixed level must not be finer than the reference")
        spatial = self.ladder if self.axis == "h" else (self.fixed_level,)
        if min(spatial, default=1) < 1:
            raise DomainError("spatial levels must be at least 1")
        for e in self.expectations:
            if e.metric not in self.norms:
                raise DomainError(f"expectation on {e.metric} which is not computed")

    @property
    def data_case(self) -> CustomCase:
        return self.custom if self.case == "custom" else CASES[self.case]

    def problem(self) -> ProblemData:
        return self.data_case.build(self.alpha, self.T, self.dim)

    def cache_key(self) -> str:
        return json.dumps({"case": asdict(self.data_case)}, sort_keys=True)

    def levels(self, k: int) -> tuple[int, int]:
        """``(h_level, tau_level)`` of ladder entry ``k``."""
        return (self.fixed_level, k) if self.axis == "tau" else (k, self.fixed_level)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["expectations"] = [asdict(e) for e in self.expectations]
        return d


def _mk(name, table, dim, case, axis, ladder, fixed, ref, norms, expect, beta, desc, desk):
    return ExperimentSpec(name=name, dim=dim, case=case, axis=axis, ladder=ladder,
                          fixed_level=fixed, reference=ref, norms=norms,
                          expectations=expect, beta=beta, table=table,
                          description=desc, desk=desk)


def preset_registry() -> list[ExperimentSpec]:
    """Presets for the ten convergence tables, each with a desk-scale variant.

    Full-scale presets use references ``(2^-10, 2^-18)`` in 1D and
    ``(2^-8, 2^-12)`` in 2D; desk presets use ``(2^-8, 2^-13)`` and
    ``(2^-7, 2^-10)`` with ladders shifted to stay clear of the reference.
    """
    R1, R2 = (10, 18), (8, 12)
    D1, D2 = (8, 13), (7, 10)
    E = Expectation
    rough = ("f = x^-0.99 t^-0.49 (some printings caption this table with "
             "x^-0.49; the experiment uses x^-0.99)")
    rows = [
        # name, table, dim, case, axis, full ladder/fixed, desk ladder/fixed, norms, expect, beta, desc
        ("exp1-f-smooth-tau", "1", 1, "f-x049", "tau", ((13, 14, 15, 16), 10), ((8, 9, 10, 11), 8),
         ("e1", "e2"), (E("e1", 0.8, 1.2), E("e2", 0.35, 0.7)), 0.0,
         "u0 = 0, f = x^-0.49 t^-0.49, temporal sweep"),
        ("exp1-f-smooth-h", "2", 1, "f-x049", "h", ((4, 5, 6, 7), 18), ((3, 4, 5, 6), 13),
         ("e1", "e2"), (E("e1", 1.75, 2.1), E("e2", 0.8, 1.1)), 0.0,
         "u0 = 0, f = x^-0.49 t^-0.49, spatial sweep"),
        ("exp1-f-rough-tau", "3", 1, "f-x099", "tau", ((12, 13, 14, 15), 10), ((8, 9, 10, 11), 8),
         ("e1", "e2"), (E("e1", 0.7, 1.1), E("e2", 0.25, 0.6)), 0.5,
         rough + ", temporal sweep"),
        ("exp1-f-rough-h", "4", 1, "f-x099", "h", ((4, 5, 6, 7), 18), ((3, 4, 5, 6), 13),
         ("e1", "e2"), (E("e1", 1.35, 1.7), E("e2", 0.4, 0.7)), 0.5,
         rough + ", spatial sweep"),
        ("exp1-u0-tau", "5", 1, "u0-x049", "tau", ((9, 10, 11, 12), 10), ((6, 7, 8, 9), 8),
         ("e1",), (E("e1", 0.4, 0.75),), 0.0,
         "u0 = x^-0.49, f = 0, temporal sweep"),
        ("exp1-u0-h", "6", 1, "u0-x049", "h", ((4, 5, 6, 7), 18), ((3, 4, 5, 6), 13),
         ("e1",), (E("e1", 1.75, 2.1),), 0.0,
         "u0 = x^-0.49, f = 0, spatial sweep (observed close to second order)"),
        ("exp2-dirac-f-h", "7", 2, "f-dirac", "h", ((3, 4, 5, 6), 12), ((2, 3, 4, 5), 10),
         ("e1",), (E("e1", 0.85, 1.15),), 1.0,
         "u0 = 0, f = t^-0.49 delta at (0.5, 0.5), spatial sweep"),
        ("exp2-dirac-f-tau", "8", 2, "f-dirac", "tau", ((3, 4, 5, 6), 8), ((4, 5, 6, 7), 7),
         ("e1",), (E("e1", 0.4, 0.75),), 1.0,
         "u0 = 0, f = t^-0.49 delta at (0.5, 0.5), temporal sweep"),
        ("exp2-dirac-u0-h", "9", 2, "u0-dirac", "h", ((3, 4, 5, 6), 12), ((2, 3, 4, 5), 10),
         ("e1",), (E("e1", 0.85, 1.15),), 1.0,
         "u0 = delta at (0.5, 0.5), f = 0, spatial sweep"),
        ("exp2-dirac-u0-tau", "10", 2, "u0-dirac", "tau", ((7, 8, 9, 10), 8), ((4, 5, 6, 7), 7),
         ("e1",), (E("e1", 0.35, 0.75),), 1.0,
         "u0 = delta at (0.5, 0.5), f = 0, temporal sweep"),
    ]
    out = []
    for name, table, dim, case, axis, full, desk, norms, expect, beta, desc in rows:
        out.append(_mk(name, table, dim, case, axis, full[0], full[1], R1 if dim == 1 else R2,
                       norms, expect, beta, desc, False))
        out.append(_mk(name + "-desk", table, dim, case, axis, desk[0], desk[1],
                       D1 if dim == 1 else D2, norms, expect, beta, desc + " (desk scale)", True))
    return out


def get_preset(name: str) -> ExperimentSpec:
    for spec in preset_registry():
        if spec.name == name:
            return spec
    raise DomainError(f"unknown preset {name!r}")


def load_config(path, base: ExperimentSpec | None = None) -> ExperimentSpec:
    """Read a TOML file whose keys mirror :class:`ExperimentSpec`.

    A ``preset`` key names a registry entry whose fields the file overrides;
    ``[expect]`` maps metrics to ``[lo, hi]`` windows and ``[custom]`` holds
    :class:`CustomCase` parameters.
    """
    with open(path, "rb") as fh:
        cfg = tomllib.load(fh)
    if "preset" in cfg:
        base = get_preset(cfg.pop("preset"))
    fields = {}
    if "expect" in cfg:
        fields["expectations"] = tuple(Expectation(m, *w) for m, w in cfg.pop("expect").items())
    if "custom" in cfg:
        fields["custom"] = CustomCase(**cfg.pop("custom"))
        fields.setdefault("case", "custom")
    for key in ("ladder", "reference", "norms"):
        if key in cfg:
            cfg[key] = tuple(cfg[key])
    fields.update(cfg)
    if base is not None:
        return replace(base, **fields)
    try:
        return ExperimentSpec(**fields)
    except TypeError as exc:
        raise DomainError(f"incomplete or invalid experiment config: {exc}") from exc


# }}}

# {{{ execution


@dataclass
class RunRecord:
    """Outcome of one experiment run; serializable to JSON."""

    spec: dict
    axis: str
    rows: list
    orders: dict
    checks: list
    monotone: bool
    timings: dict
    errors: list = field(default_factory=list)
    artifacts: dict = field(default_factory=dict)
    seed: int | None = None

    @property
    def passed(self) -> bool:
        return not self.errors and all(c["passed"] for c in self.checks)

    def report(self) -> ErrorReport:
        return ErrorReport(self.axis, tuple(
            ErrorRow(r["level"], r["size"], r.get("e1"), r.get("e2"), r.get("nodal"))
            for r in self.rows))

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=_json_default)

    @classmethod
    def from_json(cls, text: str) -> "RunRecord":
        return cls(**json.loads(text))


def _json_default(obj):
    if isinstance(obj, tuple):
        return list(obj)
    if hasattr(obj, "item"):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _mean_last_two(orders):
    tail = [o for o in orders[1:] if o is not None][-2:]
    if not tail or any(not math.isfinite(o) for o in tail):
        return float("nan")
    return sum(tail) / len(tail)


def _solve_level(spec, data, ref, k):
    h_level, tau_level = spec.levels(k)
    t0 = time.perf_counter()
    space = ref.solution.space if h_level == ref.h_level else space_for_level(spec.dim, h_level)
    grid = TimeGrid.uniform(spec.T, int(round(spec.T * 2**tau_level)))
    U = solve(data, space, grid)
    t1 = time.perf_counter()
    row = {"level": k, "size": 2.0**-k}
    if "e1" in spec.norms:
        row["e1"] = e1_l2l2(U, ref)
    if "e2" in spec.norms:
        row["e2"] = e2_fractional(U, ref)
    if "nodal" in spec.norms:
        row["nodal"] = nodal_error(U, ref)
    return row, {"solve": t1 - t0, "norms": time.perf_counter() - t1}


def run_experiment(spec: ExperimentSpec, cache_dir=None, out_dir=None,
                   jobs: int = 1, seed: int | None = None) -> RunRecord:
    """Build the reference, solve every ladder level and evaluate expectations.

    With ``out_dir`` set, writes ``tables/<name>.csv``, ``tables/<name>.md``
    and ``records/<name>.json`` below it.  A failing level is recorded and
    does not abort the others.
    """
    data = spec.problem()
    t0 = time.perf_counter()
    ref = fine_reference(data, *spec.reference, dim=spec.dim, cache_dir=cache_dir,
                         key=spec.cache_key())
    timings = {"reference": time.perf_counter() - t0, "levels": {}}

    def work(k):
        try:
            return k, _solve_level(spec, data, ref, k), None
        except FracDGError as exc:
            logger.error("level %d of %s failed: %s", k, spec.name, exc)
            return k, None, f"level {k}: {type(exc).__name__}: {exc}"

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, spec.ladder))
    else:
        results = [work(k) for k in spec.ladder]

    rows, errors = [], []
    for k, res, err in results:
        if err is not None:
            errors.append(err)
            nan = float("nan")
            rows.append({"level": k, "size": 2.0**-k, **{m: nan for m in spec.norms}})
            continue
        row, tm = res
        rows.append(row)
        timings["levels"][str(k)] = tm
    timings["total"] = time.perf_counter() - t0

    orders = {m: observed_orders([r[m] for r in rows]) for m in spec.norms}
    checks = []
    for e in spec.expectations:
        val = _mean_last_two(orders[e.metric])
        checks.append({"metric": e.metric, "value": val, "lo": e.lo, "hi": e.hi,
                       "passed": bool(e.lo <= val <= e.hi)})
    e1 = [r.get("e1") for r in rows]
    monotone = bool("e1" not in spec.norms or all(a > b for a, b in zip(e1, e1[1:])))

    record = RunRecord(spec=spec.to_dict(), axis=spec.axis, rows=rows, orders=orders,
                       checks=checks, monotone=monotone, timings=timings, errors=errors,
                       seed=seed)
    if ref.path is not None:
        record.artifacts["reference"] = str(ref.path)
    if out_dir is not None:
        write_outputs(record, out_dir)
    return record


def write_outputs(record: RunRecord, out_dir) -> None:
    out = Path(out_dir)
    name = record.spec["name"]
    (out / "tables").mkdir(parents=True, exist_ok=True)
    (out / "records").mkdir(parents=True, exist_ok=True)
    paths = {"csv": out / "tables" / f"{name}.csv",
             "markdown": out / "tables" / f"{name}.md",
             "record": out / "records" / f"{name}.json"}
    paths["csv"].write_text(emit_tables(record, "csv"))
    paths["markdown"].write_text(emit_tables(record, "markdown"))
    record.artifacts.update({k: str(v) for k, v in paths.items()})
    paths["record"].write_text(record.to_json())


# }}}

# {{{ tables


def format_error(v) -> str:
    if v is None or not math.isfinite(v):
        return "nan"
    return f"{v:.2e}"


def format_order(v) -> str:
    if v is None:
        return "--"
    if not math.isfinite(v):
        return "nan"
    return f"{v:.2f}"


def _table_rows(record: RunRecord):
    norms = [m for m in NORMS if m in record.orders]
    axis = "tau" if record.axis == "tau" else "h"
    header = [axis]
    for m in norms:
        header += [m.upper(), f"{m.upper()} order"]
    body = []
    for i, r in enumerate(record.rows):
        line = [f"2^-{r['level']}"]
        for m in norms:
            line += [format_error(r.get(m)), format_order(record.orders[m][i])]
        body.append(line)
    return header, body


def emit_tables(record: RunRecord, fmt: str = "csv") -> str:
    """Render the error table: one row per level, 3 significant digits for
    errors and 2 decimals for orders (``--`` on the first row)."""
    header, body = _table_rows(record)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(body)
        return buf.getvalue()
    if fmt in ("markdown", "md"):
        lines = ["| " + " | ".join(header) + " |",
                 "|" + "|".join("---" for _ in header) + "|"]
        lines += ["| " + " | ".join(row) + " |" for row in body]
        return "\n".join(lines) + "\n"
    raise DomainError(f"unknown table format {fmt!r}")


def parse_markdown_table(text: str) -> list[list[str]]:
    """Inverse of the markdown rendering: header row followed by body rows."""
    rows = []
    for line in text.strip().splitlines():
        cells = [c.strip() for c in line.strip().strip("|").split("|")]
        if all(set(c) <= {"-", ":"} and c for c in cells):
            continue
        rows.append(cells)
    return rows


# }}}

__all__ = [
    "CASES",
    "CustomCase",
    "Expectation",
    "ExperimentSpec",
    "RunRecord",
    "emit_tables",
    "get_preset",
    "load_config",
    "parse_markdown_table",
    "preset_registry",
    "run_experiment",
    "write_outputs",
]
