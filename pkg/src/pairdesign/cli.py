"""Command-line front end.

Subcommands: ``design`` (build a matching/blocking and sample an
allocation), ``evaluate`` (exact MSE report for supplied probabilities),
``simulate`` (Monte Carlo comparison from a config file), and ``verify``
(run the oracle suite).  All tabular I/O is CSV with a header row;
nested reports are JSON.  Subject indices in files are 1-based; ids are
treated as opaque strings.  Every command takes ``--seed`` and produces
byte-identical output for a given seed regardless of ``--threads``.
"""

from __future__ import annotations

import csv
import json
import math
import os
import sys
from dataclasses import asdict

import click
import numpy as np

from .core import ResponseModel, Subjects
from .designs import bcrd, sample_allocation, sorted_block_partition, sorted_pair_matching
from .estimators import LogisticModelSpec, irls_logit
from .matching import (mahalanobis_distance_matrix, matchset_to_partition,
                       min_weight_perfect_matching)
from .mse import (bcrd_expected_r_squared, exact_mse, match_r_squared,
                  mse_gap_bcrd_pm)
from .core import MatchSet
from .rng import SplitMix64, derive_seed
from .simulation import (DesignSpec, SimConfig, hierarchical_block_partition,
                         parametric_bootstrap, resolve_design, run_monte_carlo)
from . import verify as verify_mod


class CliError(click.ClickException):
    exit_code = 2


def _read_csv(path: str) -> tuple[list[str], list[list[str]]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            rows = list(reader)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}")
    if not rows:
        raise CliError(f"{path}: file is empty")
    header = [h.strip() for h in rows[0]]
    body = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise CliError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        body.append([c.strip() for c in row])
    if not body:
        raise CliError(f"{path}: no data rows")
    return header, body


def _parse_float(path: str, lineno: int, column: str, text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise CliError(f"{path}:{lineno}: column {column!r} has non-numeric value {text!r}")


def _load_subjects(path: str, covariate_columns=None,
                   skip_columns=()) -> tuple[Subjects, dict]:
    header, body = _read_csv(path)
    if not header or header[0] != "id":
        raise CliError(f"{path}: first column must be 'id'")
    if covariate_columns is None:
        covariate_columns = [c for c in header[1:] if c not in skip_columns]
    for c in covariate_columns:
        if c not in header:
            raise CliError(f"{path}: no column named {c!r}")
    col_idx = {c: header.index(c) for c in covariate_columns}
    ids = []
    X = []
    extra = {c: [] for c in header[1:] if c not in covariate_columns}
    for lineno, row in enumerate(body, start=2):
        ids.append(row[0])
        X.append([_parse_float(path, lineno, c, row[col_idx[c]])
                  for c in covariate_columns])
        for c in extra:
            extra[c].append(row[header.index(c)])
    if len(ids) % 2 != 0:
        raise CliError(f"{path}: subject count {len(ids)} must be even")
    if len(set(ids)) != len(ids):
        raise CliError(f"{path}: subject ids must be unique")
    try:
        subjects = Subjects(ids=tuple(ids), X=np.array(X, dtype=float).reshape(len(ids), -1))
    except ValueError as exc:
        raise CliError(f"{path}: {exc}")
    return subjects, extra


def _format_float(x: float) -> str:
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return repr(float(x))


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_float(c) if isinstance(c, float) else c
                             for c in row])


def _write_json(path: str | None, payload) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if path is None:
        click.echo(text, nl=False)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _parse_design_token(token: str) -> DesignSpec:
    token = token.strip()
    if token == "bcrd":
        return DesignSpec("bcrd")
    if token == "pm":
        return DesignSpec("pm")
    if token in ("pm_random", "pm:random"):
        return DesignSpec("pm_random", label="pm_random")
    if token == "block":
        return DesignSpec("block", 8)
    if token.startswith("block:"):
        try:
            return DesignSpec("block", int(token.split(":", 1)[1]))
        except ValueError:
            raise CliError(f"bad block design spec {token!r}")
    raise CliError(f"unknown design {token!r}; use bcrd, block[:B], pm, pm_random")


@click.group()
def main():
    """Experimental-design toolkit for two-arm trials with binary outcomes."""


@main.command("design")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True),
              help="Subjects CSV with columns id,x1,...,xd.")
@click.option("--method", type=click.Choice(["pm", "block", "bcrd"]), required=True)
@click.option("--blocks", default=8, show_default=True,
              help="Number of blocks for --method block.")
@click.option("--sort-key", "sort_key", default=None,
              help="Covariate column to sort on (forces 1-d sorted matching/blocking).")
@click.option("--seed", default=0, show_default=True, help="Allocation sampling seed.")
@click.option("--out", "out_dir", default=".", show_default=True, type=click.Path())
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv",
              show_default=True)
def cmd_design(input_path, method, blocks, sort_key, seed, out_dir, fmt):
    """Construct a design from covariates and sample one allocation."""
    subjects, _ = _load_subjects(input_path)
    if subjects.n_subjects < 4:
        raise CliError("need at least 4 subjects")
    os.makedirs(out_dir, exist_ok=True)

    key = None
    if sort_key is not None:
        cols = [f"x{i}" for i in range(1, subjects.d + 1)]
        header, _body = _read_csv(input_path)
        if sort_key not in header[1:]:
            raise CliError(f"--sort-key {sort_key!r} is not a covariate column")
        key = subjects.X[:, header[1:].index(sort_key)]
    elif subjects.d == 1:
        key = subjects.X[:, 0]

    matches = None
    distances = None
    if method == "pm":
        if subjects.d == 0:
            raise CliError("pair matching needs at least one covariate")
        if key is not None:
            matches = sorted_pair_matching(key)
            distances = mahalanobis_distance_matrix(key.reshape(-1, 1))
        else:
            distances = mahalanobis_distance_matrix(subjects)
            matches = min_weight_perfect_matching(distances)
        partition = matchset_to_partition(matches)
    elif method == "block":
        if key is not None:
            partition = sorted_block_partition(key, blocks)
        elif subjects.d == 0:
            raise CliError("blocking needs at least one covariate")
        elif blocks == 8:
            partition = hierarchical_block_partition(subjects)
        else:
            raise CliError("multi-covariate blocking supports 8 blocks; "
                           "use --sort-key for other counts")
    else:
        partition = bcrd(subjects.n_subjects)

    rng = SplitMix64(derive_seed(seed, 0xA110C))
    allocation = sample_allocation(partition, rng)
    arms = ["T" if s > 0 else "C" for s in allocation.w]

    alloc_rows = [[subjects.ids[i], arms[i]] for i in range(subjects.n_subjects)]
    match_rows = []
    if matches is not None:
        for k, (i, j) in enumerate(matches.pairs, start=1):
            match_rows.append([k, subjects.ids[i], subjects.ids[j],
                               float(distances[i, j])])
    block_rows = []
    if method == "block":
        for b, block in enumerate(partition.blocks, start=1):
            for i in block:
                block_rows.append([b, subjects.ids[i]])

    if fmt == "csv":
        _write_csv(os.path.join(out_dir, "allocation.csv"), ["id", "arm"], alloc_rows)
        if match_rows:
            _write_csv(os.path.join(out_dir, "matches.csv"),
                       ["pair", "id_1", "id_2", "distance"], match_rows)
        if block_rows:
            _write_csv(os.path.join(out_dir, "blocks.csv"), ["block", "id"], block_rows)
    else:
        payload = {
            "method": method,
            "seed": seed,
            "allocation": [{"id": i, "arm": a} for i, a in alloc_rows],
        }
        if match_rows:
            payload["matches"] = [{"pair": p, "id_1": a, "id_2": b, "distance": d}
                                  for p, a, b, d in match_rows]
        if block_rows:
            payload["blocks"] = [{"block": b, "id": i} for b, i in block_rows]
        _write_json(os.path.join(out_dir, "design.json"), payload)
    click.echo(f"{method}: wrote allocation for {subjects.n_subjects} subjects to {out_dir}")


@main.command("evaluate")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True),
              help="CSV with columns id,p_t,p_c.")
@click.option("--designs", default="bcrd,pm", show_default=True,
              help="Comma-separated designs to evaluate (e.g. bcrd,block:8,pm).")
@click.option("--matches", "matches_path", default=None, type=click.Path(exists=True),
              help="Optional matches.csv overriding the sorted pairing.")
@click.option("--out", "out_dir", default=None, type=click.Path(),
              help="Directory for the report (default: stdout).")
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json",
              show_default=True)
def cmd_evaluate(input_path, designs, matches_path, out_dir, fmt):
    """Exact MSE report for user-supplied success probabilities."""
    header, body = _read_csv(input_path)
    if header[:3] != ["id", "p_t", "p_c"]:
        raise CliError(f"{input_path}: header must be id,p_t,p_c")
    ids, p_t, p_c = [], [], []
    for lineno, row in enumerate(body, start=2):
        ids.append(row[0])
        pt = _parse_float(input_path, lineno, "p_t", row[1])
        pc = _parse_float(input_path, lineno, "p_c", row[2])
        for name, p in (("p_t", pt), ("p_c", pc)):
            if not 0.0 <= p <= 1.0:
                raise CliError(f"{input_path}:{lineno}: {name}={p} outside [0, 1]")
        p_t.append(pt)
        p_c.append(pc)
    try:
        model = ResponseModel(np.array(p_t), np.array(p_c))
    except ValueError as exc:
        raise CliError(f"{input_path}: {exc}")
    v = model.v
    nn = model.n_subjects
    n = nn // 2

    if matches_path is not None:
        mh, mbody = _read_csv(matches_path)
        if mh[:3] != ["pair", "id_1", "id_2"]:
            raise CliError(f"{matches_path}: header must start with pair,id_1,id_2")
        index = {sid: k for k, sid in enumerate(ids)}
        pairs = []
        for lineno, row in enumerate(mbody, start=2):
            for sid in (row[1], row[2]):
                if sid not in index:
                    raise CliError(f"{matches_path}:{lineno}: unknown id {sid!r}")
            pairs.append((index[row[1]], index[row[2]]))
        matches = MatchSet(pairs)
    else:
        matches = sorted_pair_matching(v)

    design_reports = []
    for token in designs.split(","):
        spec = _parse_design_token(token)
        try:
            if spec.method == "bcrd":
                part = bcrd(nn)
            elif spec.method == "block":
                part = sorted_block_partition(v, spec.n_blocks)
            elif spec.method == "pm":
                part = matchset_to_partition(matches)
            else:
                raise CliError("pm_random cannot be evaluated in closed form; "
                               "its MSE equals bcrd")
        except ValueError as exc:
            raise CliError(str(exc))
        br = exact_mse(model, part)
        design_reports.append({
            "design": spec.label,
            "quadratic_form": br.quadratic_form,
            "design_term": br.design_term,
            "noise_term": br.noise_term,
            "mse": br.total,
        })

    constant_v = bool(np.ptp(v) == 0.0)
    report = {
        "n_subjects": nn,
        "tau": float(np.mean(model.p_t - model.p_c)),
        "designs": design_reports,
        "matches": [(ids[i], ids[j]) for i, j in matches.pairs],
        "gap_bcrd_pm": mse_gap_bcrd_pm(v, matches),
        "match_r_squared": None if constant_v else match_r_squared(v, matches),
        "expected_r_squared_random_matching": bcrd_expected_r_squared(n),
    }
    if out_dir is None and fmt == "json":
        _write_json(None, report)
        return
    os.makedirs(out_dir or ".", exist_ok=True)
    base = out_dir or "."
    if fmt == "json":
        _write_json(os.path.join(base, "evaluate.json"), report)
    else:
        rows = [[d["design"], report["tau"], d["quadratic_form"], d["noise_term"],
                 d["mse"], report["gap_bcrd_pm"],
                 float("nan") if report["match_r_squared"] is None
                 else report["match_r_squared"],
                 report["expected_r_squared_random_matching"]]
                for d in design_reports]
        _write_csv(os.path.join(base, "evaluate.csv"),
                   ["design", "tau", "quadratic_form", "noise_term", "mse",
                    "gap_bcrd_pm", "match_r_squared", "expected_r_squared_random"],
                   rows)
    click.echo(f"evaluated {len(design_reports)} designs")


_SYNTH_KEYS = {"n_subjects", "sizes", "d", "beta0", "beta", "beta_t", "link",
               "designs", "n_sim", "seed", "estimators", "batch_size"}
_BOOT_KEYS = {"data_csv", "response_column", "treatment_column",
              "covariate_columns", "subsample_sizes", "inject_beta_t",
              "designs", "n_sim", "seed", "estimators", "batch_size"}


def _load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid JSON ({exc})")
    if not isinstance(cfg, dict):
        raise CliError(f"{path}: config must be a JSON object")
    allowed = _BOOT_KEYS if "data_csv" in cfg else _SYNTH_KEYS
    for key in cfg:
        if key not in allowed:
            raise CliError(f"{path}: unknown config key {key!r}")
    return cfg


def _require(cfg: dict, key: str, path: str):
    if key not in cfg:
        raise CliError(f"{path}: missing required config key {key!r}")
    return cfg[key]


def _sim_rows_to_table(rows) -> list[list]:
    return [[r.design, r.estimator, r.n_subjects, r.d, r.mean_estimate,
             r.mse, r.mc_se, r.excluded] for r in rows]


_SIM_HEADER = ["design", "estimator", "n", "d", "mean_estimate", "mse",
               "mc_se", "excluded"]


@main.command("simulate")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--seed", default=None, type=int, help="Override the config seed.")
@click.option("--threads", default=None, type=int,
              help="Worker threads (default: available cores). Output is "
                   "identical for any value.")
@click.option("--out", "out_dir", default=".", show_default=True, type=click.Path())
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv",
              show_default=True)
def cmd_simulate(config_path, seed, threads, out_dir, fmt):
    """Monte Carlo design comparison driven by a JSON config."""
    cfg = _load_config(config_path)
    threads = threads if threads and threads > 0 else (os.cpu_count() or 1)
    master = seed if seed is not None else int(cfg.get("seed", 0))
    designs = tuple(_parse_design_token(t) for t in _require(cfg, "designs", config_path))
    estimators = tuple(cfg.get("estimators", ["diff_in_means"]))
    n_sim = int(_require(cfg, "n_sim", config_path))
    batch_size = int(cfg.get("batch_size", 8192))

    all_rows = []
    meta = {"seed": master, "n_sim": n_sim}
    if "data_csv" in cfg:
        subjects, extra = _load_subjects(
            cfg["data_csv"],
            covariate_columns=cfg.get("covariate_columns"),
            skip_columns={cfg.get("response_column", "y"),
                          cfg.get("treatment_column") or ""})
        resp_col = cfg.get("response_column", "y")
        if resp_col not in extra:
            raise CliError(f"{cfg['data_csv']}: no response column {resp_col!r}")
        y = np.array([_parse_float(cfg["data_csv"], 0, resp_col, t)
                      for t in extra[resp_col]])
        if not np.all((y == 0) | (y == 1)):
            raise CliError(f"{cfg['data_csv']}: responses must be 0/1")
        treat_col = cfg.get("treatment_column")
        cols = [np.ones(subjects.n_subjects), subjects.X]
        if treat_col:
            if treat_col not in extra:
                raise CliError(f"{cfg['data_csv']}: no treatment column {treat_col!r}")
            wmap = {"T": 1.0, "C": -1.0, "1": 1.0, "0": -1.0, "+1": 1.0, "-1": -1.0}
            try:
                w = np.array([wmap[t] for t in extra[treat_col]])
            except KeyError as exc:
                raise CliError(f"{cfg['data_csv']}: bad treatment value {exc}")
            cols.append(w)
        design_mat = np.column_stack(cols)
        fit = irls_logit(design_mat, y)
        fitted_bt = fit.coef[-1] if treat_col else 0.0
        beta_t = float(cfg.get("inject_beta_t", fitted_bt))
        fitted = LogisticModelSpec(fit.coef[0],
                                   fit.coef[1:1 + subjects.d], beta_t,
                                   link="expit")
        sim_cfg = SimConfig(
            n_subjects=subjects.n_subjects, d=subjects.d, designs=designs,
            model=fitted, n_sim=n_sim, seed=master, estimators=estimators,
            batch_size=batch_size)
        sizes = cfg.get("subsample_sizes") or [subjects.n_subjects]
        result = parametric_bootstrap(subjects, fitted, sim_cfg,
                                      subsample_sizes=sizes, threads=threads)
        all_rows.extend(result.rows)
        meta["mode"] = "bootstrap"
        meta["fitted_model"] = {"beta0": fitted.beta0,
                                "beta": list(fitted.beta),
                                "beta_t": fitted.beta_t,
                                "link": fitted.link,
                                "converged": fit.converged,
                                "separation": fit.separation}
    else:
        sizes = cfg.get("sizes") or [int(_require(cfg, "n_subjects", config_path))]
        d = int(cfg.get("d", 1))
        model = LogisticModelSpec(float(cfg.get("beta0", 0.0)),
                                  cfg.get("beta", [0.0] * d),
                                  float(cfg.get("beta_t", 0.0)),
                                  link=cfg.get("link", "expit"))
        for nn in sizes:
            sub_seed = derive_seed(master, int(nn)) if len(sizes) > 1 else master
            sim_cfg = SimConfig(n_subjects=int(nn), d=d, designs=designs,
                                model=model, n_sim=n_sim, seed=sub_seed,
                                estimators=estimators, batch_size=batch_size)
            result = run_monte_carlo(sim_cfg, threads=threads)
            all_rows.extend(result.rows)
        meta["mode"] = "synthetic"
    from . import engine
    meta["backend"] = engine.BACKEND

    os.makedirs(out_dir, exist_ok=True)
    if fmt == "csv":
        _write_csv(os.path.join(out_dir, "results.csv"), _SIM_HEADER,
                   _sim_rows_to_table(all_rows))
    else:
        payload = {"meta": meta, "rows": [asdict(r) for r in all_rows]}
        _write_json(os.path.join(out_dir, "results.json"), payload)
    click.echo(f"wrote {len(all_rows)} result rows to {out_dir}")


@main.command("verify")
@click.option("--only", "only", multiple=True,
              help="Run only the named checks (repeatable).")
@click.option("--seed", default=20240801, show_default=True)
@click.option("--fast", is_flag=True, help="Smaller instance counts.")
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text",
              show_default=True)
@click.option("--out", "out_dir", default=None, type=click.Path())
@click.option("--inject-bad-sigma", is_flag=True, hidden=True,
              help="Deliberately corrupt one covariance (failure-path test).")
def cmd_verify(only, seed, fast, fmt, out_dir, inject_bad_sigma):
    """Run the oracle verification suite; exit 0 iff everything passes."""
    results = verify_mod.run_all(seed=seed, fast=fast,
                                 _tamper_sigma=inject_bad_sigma)
    if only:
        wanted = set(only)
        results = [r for r in results if any(r.name.startswith(w) for w in wanted)]
        if not results:
            raise CliError(f"no checks match --only {sorted(wanted)}")
    payload = [{"name": r.name, "passed": r.passed, "statistic": r.statistic,
                "detail": r.detail} for r in results]
    if fmt == "json":
        _write_json(os.path.join(out_dir, "verify.json") if out_dir else None, payload)
    else:
        for r in results:
            status = "PASS" if r.passed else "FAIL"
            click.echo(f"{status} {r.name}: statistic={r.statistic:.3e} "
                       + " ".join(f"{k}={v}" for k, v in sorted(r.detail.items())
                                  if k not in ("worst_witness",)))
            if not r.passed and "worst_witness" in r.detail:
                click.echo(f"     witness: {r.detail['worst_witness']}")
    if not all(r.passed for r in results):
        sys.exit(1)


if __name__ == "__main__":
    main()
