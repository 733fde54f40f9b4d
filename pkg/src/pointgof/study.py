"""Power-study harness: rejection rates of several tests against several alternatives.

A study is described by a TOML file::

    [study]
    seed = 42
    m = 99
    alpha = 0.05
    window = [0, 1, 0, 1]

    [null]
    model = "poisson"
    lambda = 100

    [[alternative]]
    model = "matclust"
    kappa = 50
    radius = 0.1
    mu = 5
    reps = 100

    [[test]]
    summary = "L"
    statistic = "FUN"
    measure = "ERL"

Every (alternative, test) pair is a cell.  Replication ``r`` of alternative
``a`` draws its pattern from substream ``(3, a, r)`` so all tests see the same
patterns; the test itself simulates from substream ``(4, a, t, r)``.  Finished
cells are stored under ``cells/`` and skipped when the study is resumed.  Only
deterministic quantities go into ``results.csv``; run times go to
``timings.csv``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, PointGofError
from .pattern import EvalGrid, Window, default_grid
from .procedures import TestConfig, run_test
from .simulate import RngSeed, model_from_params, simulate

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = ["StudyConfig", "CellResult", "load_study", "parse_study", "run_study", "RESULT_COLUMNS"]

RESULT_COLUMNS = (
    "alternative", "summary", "statistic", "measure", "m", "reps", "completed", "failures",
    "rejections", "rate", "se",
)
_TEST_KEYS = {"summary", "statistic", "measure", "m", "s", "r_index", "corr", "method", "name", "grid_points", "r_max"}


@dataclass(frozen=True)
class AlternativeSpec:
    name: str
    params: dict
    reps: int


@dataclass(frozen=True)
class TestSpec:
    __test__ = False

    summary: str
    statistic: str
    measure: str | None
    m: int | None
    s: int | None
    r_index: int | None
    corr: str
    method: str
    name: str
    grid_points: int
    r_max: float | None


@dataclass(frozen=True)
class StudyConfig:
    seed: int
    alpha: float
    window: Window
    null_params: dict
    alternatives: tuple
    tests: tuple
    m: int | None = None
    s: int | None = None
    out_dir: str | None = None
    threads: int = 1


@dataclass
class CellResult:
    alternative: str
    test: TestSpec
    m: int
    reps: int
    p_values: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def completed(self) -> int:
        return len(self.p_values)

    def rejections(self, alpha: float) -> int:
        return sum(p <= alpha + 1e-12 for p in self.p_values)


def _int_or_none(d, key):
    v = d.get(key)
    if v is None:
        return None
    if isinstance(v, bool) or int(v) != v:
        raise ConfigError(f"{key} must be an integer, got {v!r}")
    return int(v)


def parse_study(data: dict) -> StudyConfig:
    """Validate a parsed TOML mapping."""
    try:
        study = data["study"]
        null = data["null"]
        alts = data["alternative"]
        tests = data["test"]
    except KeyError as exc:
        raise ConfigError(f"study config is missing the [{exc.args[0]}] section") from None
    if not alts or not tests:
        raise ConfigError("a study needs at least one alternative and one test")
    win = study.get("window", [0, 1, 0, 1])
    if len(win) != 4:
        raise ConfigError("window must be [x_min, x_max, y_min, y_max]")
    window = Window(*map(float, win))
    model_from_params(null.get("model", ""), null)
    alternatives = []
    for k, a in enumerate(alts):
        reps = _int_or_none(a, "reps")
        if reps is None or reps < 1:
            raise ConfigError(f"alternative {k} needs reps >= 1")
        model_from_params(a.get("model", ""), a)
        name = str(a.get("name", a.get("model")))
        alternatives.append(AlternativeSpec(name, {kk: v for kk, v in a.items() if kk not in ("reps", "name")}, reps))
    specs = []
    for k, t in enumerate(tests):
        unknown = set(t) - _TEST_KEYS
        if unknown:
            raise ConfigError(f"test {k} has unknown keys {sorted(unknown)}")
        spec = TestSpec(
            summary=str(t.get("summary", "L")),
            statistic=str(t.get("statistic", "MAD")).upper(),
            measure=(str(t["measure"]).upper() if t.get("measure") else None),
            m=_int_or_none(t, "m"),
            s=_int_or_none(t, "s"),
            r_index=_int_or_none(t, "r_index"),
            corr=str(t.get("corr", "translation")),
            method=str(t.get("method", "auto")),
            name=str(t.get("name", "")),
            grid_points=_int_or_none(t, "grid_points") or 513,
            r_max=(float(t["r_max"]) if t.get("r_max") is not None else None),
        )
        # fail early on bad selectors
        _test_config(spec, StudyConfig(0, 0.05, window, null, (), (), None, None), window, RngSeed(0))
        specs.append(spec)
    alpha = float(study.get("alpha", 0.05))
    seed = _int_or_none(study, "seed")
    return StudyConfig(
        seed=0 if seed is None else seed,
        alpha=alpha,
        window=window,
        null_params=dict(null),
        alternatives=tuple(alternatives),
        tests=tuple(specs),
        m=_int_or_none(study, "m"),
        s=_int_or_none(study, "s"),
        out_dir=study.get("out_dir"),
        threads=_int_or_none(study, "threads") or 1,
    )


def load_study(path) -> StudyConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read study config: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed study config: {exc}") from None
    return parse_study(data)


def _grid(spec: TestSpec, window: Window) -> EvalGrid:
    if spec.r_max is None:
        return default_grid(window, n=spec.grid_points)
    return EvalGrid.linspace(0.0, spec.r_max, spec.grid_points)


def _test_config(spec: TestSpec, cfg: StudyConfig, window: Window, seed: RngSeed, threads: int = 1) -> TestConfig:
    return TestConfig(
        null=model_from_params(cfg.null_params["model"], cfg.null_params),
        summary=spec.summary,
        statistic=spec.statistic,
        measure=spec.measure,
        grid=_grid(spec, window),
        m=spec.m if spec.m is not None else cfg.m,
        s=spec.s if spec.s is not None else cfg.s,
        alpha=cfg.alpha,
        seed=seed,
        r_index=spec.r_index,
        corr=spec.corr,
        threads=threads,
    )


def _cell_key(cfg: StudyConfig, a: int, t: int) -> str:
    blob = json.dumps(
        {
            "seed": cfg.seed,
            "alpha": cfg.alpha,
            "window": cfg.window.as_tuple(),
            "null": cfg.null_params,
            "alternative": cfg.alternatives[a].params,
            "reps": cfg.alternatives[a].reps,
            "test": cfg.tests[t].__dict__,
            "m": cfg.m,
            "s": cfg.s,
            "index": [a, t],
        },
        sort_keys=True,
        default=str,
    )
    return hashlib.sha256(blob.encode()).hexdigest()


def _run_cell(cfg: StudyConfig, a: int, t: int, threads: int) -> CellResult:
    alt = cfg.alternatives[a]
    spec = cfg.tests[t]
    model = model_from_params(alt.params["model"], alt.params)
    root = RngSeed(cfg.seed)
    tcfg0 = _test_config(spec, cfg, cfg.window, root)
    cell = CellResult(alt.name, spec, tcfg0.m, alt.reps)
    t0 = time.perf_counter()

    def one(r):
        try:
            x = simulate(model, cfg.window, root.child(3, a, r))
            tcfg = _test_config(spec, cfg, cfg.window, root.child(4, a, t, r))
            return run_test(tcfg, x, spec.method).p_value, None
        except PointGofError as exc:
            return None, f"rep {r}: {type(exc).__name__}: {exc}"

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            out = list(ex.map(one, range(alt.reps)))
    else:
        out = [one(r) for r in range(alt.reps)]
    for p, err in out:
        if err is None:
            cell.p_values.append(p)
        else:
            cell.failures.append(err)
    cell.seconds = time.perf_counter() - t0
    return cell


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _result_row(cell: CellResult, alpha: float) -> list[str]:
    n = cell.completed
    rej = cell.rejections(alpha)
    rate = rej / n if n else math.nan
    se = math.sqrt(rate * (1 - rate) / n) if n else math.nan
    spec = cell.test
    return [
        cell.alternative, spec.summary, spec.statistic, spec.measure or "", str(cell.m), str(cell.reps), str(n),
        str(len(cell.failures)), str(rej), f"{rate:.6f}", f"{se:.6f}",
    ]


def run_study(cfg: StudyConfig, out_dir, *, threads: int | None = None, log=None) -> Path:
    """Run (or resume) every cell and write ``results.csv``; returns its path."""
    out = Path(out_dir)
    cells_dir = out / "cells"
    cells_dir.mkdir(parents=True, exist_ok=True)
    threads = cfg.threads if threads is None else threads
    rows, timings = [], []
    for a in range(len(cfg.alternatives)):
        for t in range(len(cfg.tests)):
            key = _cell_key(cfg, a, t)
            path = cells_dir / f"cell_{a:03d}_{t:03d}.json"
            cell = None
            if path.exists():
                try:
                    saved = json.loads(path.read_text())
                except json.JSONDecodeError:
                    saved = {}
                if saved.get("key") == key:
                    cell = CellResult(
                        cfg.alternatives[a].name, cfg.tests[t], saved["m"], saved["reps"],
                        saved["p_values"], saved["failures"], saved["seconds"],
                    )
            if cell is None:
                cell = _run_cell(cfg, a, t, threads)
                payload = {
                    "key": key, "m": cell.m, "reps": cell.reps, "p_values": cell.p_values,
                    "failures": cell.failures, "seconds": cell.seconds,
                }
                _write_atomic(path, json.dumps(payload, indent=1) + "\n")
            if log is not None:
                log(f"cell {a},{t} {cell.alternative}/{cell.test.summary}/{cell.test.statistic}: "
                    f"{cell.rejections(cfg.alpha)}/{cell.completed} rejections")
            rows.append(_result_row(cell, cfg.alpha))
            timings.append([cell.alternative, cell.test.summary, cell.test.statistic, cell.test.measure or "",
                            f"{cell.seconds:.3f}"])
    result = out / "results.csv"
    _write_atomic(result, _csv_text([list(RESULT_COLUMNS)] + rows))
    header = ["alternative", "summary", "statistic", "measure", "seconds"]
    _write_atomic(out / "timings.csv", _csv_text([header] + timings))
    return result


def _csv_text(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()
