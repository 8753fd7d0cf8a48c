"""Command line interface.

Commands: fit, select-rank, stability, project, synth. Every command
takes an optional key-value config file; explicit flags override config
values. Numeric artifacts are decimal text at full precision and each run
writes a provenance record, so identical inputs, settings, and seeds give
byte-identical output regardless of worker count (--threads / the
MVMF_THREADS variable only control parallelism, never results).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, plots, reports
from .analysis import lda_boundary, project
from .dataset import center_columns, load_views, parse_manifest
from .errors import (
    ConfigParseError,
    DegenerateClass,
    NotReached,
    SingularCovariance,
    SmvmfError,
)
from .factor_model import Penalty, compute_variance, from_text, to_text
from .model_selection import select_shared_rank
from .solver import FitConfig, fit
from .stability import StabilityConfig, run_stability
from .synthetic import PlantSpec, generate

_CONFIG_KEYS = {
    "manifest", "d", "r", "lambda_mode", "k", "lambda_star", "lambda_view",
    "max_iters", "rel_tol", "threshold", "subsamples", "fraction", "seed",
    "replacement", "model", "spec", "out", "threads", "plots",
}

THREADS_ENV = "MVMF_THREADS"


def _parse_kv_text(path: Path, known: set[str] | None) -> dict[str, str]:
    if not path.is_file():
        raise ConfigParseError(f"file not found: {path}")
    out: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigParseError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigParseError(f"{path}:{lineno}: empty key")
        if known is not None and key not in known:
            raise ConfigParseError(f"{path}:{lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigParseError(f"{path}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


class Settings:
    """Merged view of flags over config file over defaults."""

    def __init__(self, args: argparse.Namespace):
        self.config_path: Path | None = getattr(args, "config", None)
        self.config = (
            _parse_kv_text(self.config_path, _CONFIG_KEYS) if self.config_path else {}
        )
        self.args = args
        self.resolved: dict[str, str] = {}

    def get(self, key: str, default=None, convert=str):
        flag = getattr(self.args, key.replace("-", "_"), None)
        if flag is not None:
            value = flag
        elif key in self.config:
            raw = self.config[key]
            try:
                value = convert(raw)
            except ValueError:
                raise ConfigParseError(f"config key {key!r}: cannot parse {raw!r}") from None
        elif default is not None:
            value = default
        else:
            return None
        self.resolved[key] = str(value)
        return value

    def require(self, key: str, convert=str):
        value = self.get(key, default=None, convert=convert)
        if value is None:
            raise ConfigParseError(f"missing required setting {key!r}")
        return value

    def threads(self) -> int | None:
        value = self.get("threads", default=None, convert=int)
        if value is None:
            env = os.environ.get(THREADS_ENV)
            if env:
                try:
                    value = int(env)
                except ValueError:
                    raise ConfigParseError(
                        f"{THREADS_ENV} must be an integer, got {env!r}"
                    ) from None
        if value is not None and value < 1:
            raise ConfigParseError("threads must be at least 1")
        self.resolved.pop("threads", None)  # execution detail, not provenance
        return value

    def plots_enabled(self) -> bool:
        if getattr(self.args, "no_plots", False):
            return False
        raw = self.config.get("plots")
        if raw is not None:
            return _parse_bool(raw)
        return True


def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ConfigParseError(f"expected a boolean, got {raw!r}")


def _parse_float_list(raw: str, length: int, what: str) -> np.ndarray:
    parts = [p.strip() for p in str(raw).split(",") if p.strip()]
    try:
        values = [float(p) for p in parts]
    except ValueError:
        raise ConfigParseError(f"{what}: cannot parse {raw!r}") from None
    if len(values) == 1:
        values = values * length
    if len(values) != length:
        raise ConfigParseError(f"{what}: expected 1 or {length} values, got {len(values)}")
    return np.asarray(values)


def _out_dir(settings: Settings) -> Path:
    out = Path(settings.require("out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_centered(settings: Settings, manifest: Path):
    ds = load_views(manifest)
    return center_columns(ds)


def _dataset_digest(manifest: Path) -> str:
    # Manifests list relative filenames, so two datasets can share identical
    # manifest bytes; the digest must cover the view files themselves.
    paths = [manifest]
    paths.extend(path for _, path in parse_manifest(manifest))
    return reports.sha256_files(paths)


def _provenance_entries(settings: Settings, command: str, manifest: Path | None):
    entries = {
        "command": command,
        "smvmf_version": __version__,
        "config_sha256": (
            reports.sha256_file(settings.config_path) if settings.config_path else "-"
        ),
    }
    for key, value in settings.resolved.items():
        if key in ("out",):
            continue
        entries[f"setting_{key}"] = value
    if manifest is not None:
        entries["manifest_sha256"] = reports.sha256_file(manifest)
        for name, path in parse_manifest(manifest):
            entries[f"view_{name}_sha256"] = reports.sha256_file(path)
    return entries


def _build_penalty(settings: Settings, d: int, r: int, n_views: int) -> Penalty:
    mode = settings.get("lambda_mode", default="weights")
    if mode == "count":
        k = settings.get("k", default=2, convert=int)
        return Penalty.counts(k)
    if mode != "weights":
        raise ConfigParseError(f"lambda_mode must be 'weights' or 'count', got {mode!r}")
    shared_raw = settings.get("lambda_star", default="0")
    specific_raw = settings.get("lambda_view", default="0")
    shared = _parse_float_list(shared_raw, d, "lambda_star") if d else np.zeros(0)
    specific = _parse_float_list(specific_raw, r, "lambda_view") if r else np.zeros(0)
    return Penalty(
        mode="weights",
        shared_weights=shared,
        specific_weights=tuple(specific.copy() for _ in range(n_views)),
    )


def _cmd_fit(args: argparse.Namespace) -> int:
    settings = Settings(args)
    manifest = Path(settings.require("manifest"))
    d = settings.require("d", convert=int)
    r = settings.require("r", convert=int)
    out = _out_dir(settings)
    threads = settings.threads()  # reserved; single fits run serially
    del threads
    ds = _load_centered(settings, manifest)
    penalty = _build_penalty(settings, d, r, ds.n_views)
    cfg = FitConfig(
        shared_rank=d,
        specific_rank=r,
        penalty=penalty,
        max_iters=settings.get("max_iters", default=500, convert=int),
        rel_tol=settings.get("rel_tol", default=1e-8, convert=float),
    )
    f, trace = fit(ds, cfg)
    variance = compute_variance(f, ds)
    view_names = tuple(v.name for v in ds.views)

    (out / "model.txt").write_text(
        to_text(f, source_sha256=_dataset_digest(manifest)), encoding="utf-8"
    )
    reports.write_trace_csv(trace, out / "trace.csv")
    reports.write_variance_views_csv(variance, view_names, out / "variance_views.csv")
    reports.write_variance_regions_csv(
        variance, ds.regions, view_names, out / "variance_regions.csv"
    )
    reports.write_provenance(
        out / "provenance.txt", _provenance_entries(settings, "fit", manifest)
    )
    if settings.plots_enabled():
        plots.save_trace_plot(trace, out / "trace.png")
        plots.save_variance_plot(
            variance.shared_fraction, variance.specific_fraction, view_names,
            out / "variance.png",
        )
    print(
        f"fit: {trace.iterations} iterations, "
        f"objective {trace.objective[-1]:.6g}, "
        f"converged {str(trace.converged).lower()}"
    )
    return 0


def _cmd_select_rank(args: argparse.Namespace) -> int:
    settings = Settings(args)
    manifest = Path(settings.require("manifest"))
    r = settings.require("r", convert=int)
    threshold = settings.require("threshold", convert=float)
    out = _out_dir(settings)
    threads = settings.threads()
    ds = _load_centered(settings, manifest)
    cfg = FitConfig(
        shared_rank=1,
        specific_rank=r,
        penalty=Penalty.none(1, r, ds.n_views),
        max_iters=settings.get("max_iters", default=500, convert=int),
        rel_tol=settings.get("rel_tol", default=1e-8, convert=float),
    )
    view_names = tuple(v.name for v in ds.views)
    entries = _provenance_entries(settings, "select-rank", manifest)
    try:
        selected, rows = select_shared_rank(ds, r, threshold, cfg, threads=threads)
    except NotReached as err:
        reports.write_rank_table_csv(list(err.rows), view_names, out / "rank_table.csv")
        reports.write_provenance(out / "provenance.txt", entries)
        if settings.plots_enabled() and err.rows:
            plots.save_rank_plot(list(err.rows), view_names, threshold, out / "rank_selection.png")
        _emit_error(err)
        return 1
    reports.write_rank_table_csv(rows, view_names, out / "rank_table.csv")
    reports.write_provenance(out / "provenance.txt", entries)
    if settings.plots_enabled():
        plots.save_rank_plot(rows, view_names, threshold, out / "rank_selection.png")
    print(selected)
    return 0


def _cmd_stability(args: argparse.Namespace) -> int:
    settings = Settings(args)
    manifest = Path(settings.require("manifest"))
    d = settings.require("d", convert=int)
    r = settings.require("r", convert=int)
    k = settings.get("k", default=2, convert=int)
    out = _out_dir(settings)
    threads = settings.threads()
    ds = _load_centered(settings, manifest)
    fit_cfg = FitConfig(
        shared_rank=d,
        specific_rank=r,
        penalty=Penalty.counts(k),
        max_iters=settings.get("max_iters", default=500, convert=int),
        rel_tol=settings.get("rel_tol", default=1e-8, convert=float),
    )
    cfg = StabilityConfig(
        n_subsamples=settings.get("subsamples", default=10000, convert=int),
        fit=fit_cfg,
        subsample_fraction=settings.get("fraction", default=0.5, convert=float),
        seed=settings.get("seed", default=0, convert=int),
        with_replacement=settings.get("replacement", default=True, convert=_parse_bool),
    )
    report = run_stability(ds, cfg, threads=threads)
    reports.write_stability_csv(report, out / "stability.csv")
    reports.write_provenance(
        out / "provenance.txt", _provenance_entries(settings, "stability", manifest)
    )
    if settings.plots_enabled():
        plots.save_stability_plot(report, out / "stability.png")
    print(
        f"stability: {report.n_success} successful subsamples, "
        f"{report.n_failed} failed"
    )
    return 0


def _cmd_project(args: argparse.Namespace) -> int:
    settings = Settings(args)
    manifest = Path(settings.require("manifest"))
    model_path = Path(settings.require("model"))
    out = _out_dir(settings)
    ds = _load_centered(settings, manifest)
    if not model_path.is_file():
        raise ConfigParseError(f"model file not found: {model_path}")
    f, source_sha = from_text(model_path.read_text(encoding="utf-8"))
    dataset_sha = _dataset_digest(manifest)
    if source_sha not in ("-", dataset_sha):
        print(
            "warning: model was fitted on a different manifest "
            f"(stored digest {source_sha[:12]}..., current {dataset_sha[:12]}...)",
            file=sys.stderr,
        )
    pset = project(f, ds)
    view_names = tuple(v.name for v in ds.views)
    entries = _provenance_entries(settings, "project", manifest)
    entries["model_sha256"] = reports.sha256_file(model_path)
    for m, name in enumerate(view_names):
        reports.write_ppj_csv(pset, m, out / f"ppj_{name}.csv")
        summary = None
        if pset.labels[m] is not None and f.specific_rank == 2:
            try:
                summary = lda_boundary(pset.specific_coordinates(m), pset.labels[m])
            except (DegenerateClass, SingularCovariance) as err:
                print(f"warning: view {name}: {err}", file=sys.stderr)
        if summary is not None:
            reports.write_lda_csv(summary, out / f"lda_{name}.csv")
        if settings.plots_enabled() and f.specific_rank >= 2:
            plots.save_projection_plot(
                pset.specific_coordinates(m)[:, :2],
                pset.labels[m],
                summary,
                ("specific-1", "specific-2"),
                name,
                out / f"ppj_{name}.png",
            )
    reports.write_projection_summary_csv(pset, view_names, out / "projection_summary.csv")
    reports.write_provenance(out / "provenance.txt", entries)
    return 0


def _random_template(rng: np.random.Generator, p: int, cols: int, scale: float) -> np.ndarray:
    return scale * rng.standard_normal((p, cols)) / np.sqrt(p)


def _template_from_spec(
    raw: dict[str, str], prefix: str, p: int, cols: int, rng, scale: float
) -> np.ndarray:
    template = _random_template(rng, p, cols, scale)
    for col in range(cols):
        key = f"{prefix}_col_{col + 1}"
        if key not in raw:
            continue
        column = np.zeros(p)
        for pair in raw[key].split(","):
            pair = pair.strip()
            if not pair:
                continue
            index_s, _, value_s = pair.partition(":")
            try:
                index, value = int(index_s), float(value_s)
            except ValueError:
                raise ConfigParseError(f"synth spec {key}: bad entry {pair!r}") from None
            if not 0 <= index < p:
                raise ConfigParseError(f"synth spec {key}: region {index} outside 0..{p - 1}")
            column[index] = value
        template[:, col] = column
    return template


def _cmd_synth(args: argparse.Namespace) -> int:
    settings = Settings(args)
    spec_path = Path(settings.require("spec"))
    out = _out_dir(settings)
    raw = _parse_kv_text(spec_path, known=None)

    def need(key: str) -> str:
        if key not in raw:
            raise ConfigParseError(f"synth spec: missing key {key!r}")
        return raw[key]

    n_subjects = tuple(int(x) for x in need("n").split(","))
    p = int(need("p"))
    d = int(need("d"))
    r = int(need("r"))
    noise = float(raw.get("noise", "0"))
    seed = int(raw.get("seed", "0"))
    scale = float(raw.get("template_scale", "1"))
    strengths = None
    if "label_strength" in raw:
        strengths = tuple(float(x) for x in raw["label_strength"].split(","))
    view_names = None
    if "view_names" in raw:
        view_names = tuple(x.strip() for x in raw["view_names"].split(","))
    region_names = None
    if "region_names" in raw:
        region_names = tuple(x.strip() for x in raw["region_names"].split(","))

    template_rng = np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(len(n_subjects),))
    )
    shared_template = _template_from_spec(raw, "shared", p, d, template_rng, scale)
    specific_templates = tuple(
        _template_from_spec(raw, f"specific_{m + 1}", p, r, template_rng, scale)
        for m in range(len(n_subjects))
    )
    spec = PlantSpec(
        n_subjects=n_subjects,
        shared_template=shared_template,
        specific_templates=specific_templates,
        noise=noise,
        label_strength=strengths,
        seed=seed,
        view_names=view_names,
        region_names=region_names,
    )
    ds, truth, labels = generate(spec)
    manifest_lines = []
    for m, view in enumerate(ds.views):
        filename = f"view_{view.name}.csv"
        reports.write_view_csv(
            out / filename, view.subjects, ds.regions, view.values, labels[m]
        )
        manifest_lines.append(f"{view.name} = {filename}")
    (out / "manifest.txt").write_text("\n".join(manifest_lines) + "\n", encoding="utf-8")
    (out / "truth_model.txt").write_text(to_text(truth), encoding="utf-8")
    entries = _provenance_entries(settings, "synth", None)
    entries["spec_sha256"] = reports.sha256_file(spec_path)
    reports.write_provenance(out / "provenance.txt", entries)
    print(f"synth: wrote {ds.n_views} views to {out}")
    return 0


def _emit_error(err: SmvmfError) -> None:
    record = {"error": getattr(err, "code", "smvmf.error"), "message": str(err)}
    print(json.dumps(record, sort_keys=True), file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smvmf",
        description="Sparse multi-view matrix factorisation toolkit",
    )
    sub = parser.add_subparsers(dest="command")

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", type=Path, help="key-value config file; flags override")
        p.add_argument("--out", help="output directory")
        p.add_argument("--threads", type=int, help=f"worker count (or {THREADS_ENV})")
        p.add_argument("--no-plots", action="store_true", help="skip figure rendering")

    p_fit = sub.add_parser("fit", help="fit the factorisation on a manifest")
    p_fit.add_argument("--manifest")
    p_fit.add_argument("--d", type=int, help="shared rank")
    p_fit.add_argument("--r", type=int, help="specific rank")
    p_fit.add_argument("--lambda-mode", dest="lambda_mode", choices=("weights", "count"))
    p_fit.add_argument("--k", type=int, help="nonzeros per column in count mode")
    p_fit.add_argument("--lambda-star", dest="lambda_star", help="shared penalty weight(s)")
    p_fit.add_argument("--lambda-view", dest="lambda_view", help="specific penalty weight(s)")
    p_fit.add_argument("--max-iters", dest="max_iters", type=int)
    p_fit.add_argument("--rel-tol", dest="rel_tol", type=float)
    common(p_fit)
    p_fit.set_defaults(handler=_cmd_fit)

    p_rank = sub.add_parser("select-rank", help="scan shared ranks to a variance threshold")
    p_rank.add_argument("--manifest")
    p_rank.add_argument("--r", type=int, help="fixed specific rank")
    p_rank.add_argument("--threshold", type=float)
    p_rank.add_argument("--max-iters", dest="max_iters", type=int)
    p_rank.add_argument("--rel-tol", dest="rel_tol", type=float)
    common(p_rank)
    p_rank.set_defaults(handler=_cmd_select_rank)

    p_stab = sub.add_parser("stability", help="stability selection over subsamples")
    p_stab.add_argument("--manifest")
    p_stab.add_argument("--d", type=int)
    p_stab.add_argument("--r", type=int)
    p_stab.add_argument("--k", type=int)
    p_stab.add_argument("--subsamples", type=int)
    p_stab.add_argument("--fraction", type=float)
    p_stab.add_argument("--seed", type=int)
    p_stab.add_argument("--max-iters", dest="max_iters", type=int)
    p_stab.add_argument("--rel-tol", dest="rel_tol", type=float)
    common(p_stab)
    p_stab.set_defaults(handler=_cmd_stability)

    p_proj = sub.add_parser("project", help="export joint coordinates and boundaries")
    p_proj.add_argument("--manifest")
    p_proj.add_argument("--model", help="model document from a fit run")
    common(p_proj)
    p_proj.set_defaults(handler=_cmd_project)

    p_synth = sub.add_parser("synth", help="generate a planted synthetic dataset")
    p_synth.add_argument("--spec", help="plant recipe file")
    common(p_synth)
    p_synth.set_defaults(handler=_cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = getattr(args, "handler", None)
    if handler is None:
        parser.print_help()
        return 2
    try:
        return handler(args)
    except ConfigParseError as err:
        _emit_error(err)
        return 2
    except SmvmfError as err:
        _emit_error(err)
        return 1


if __name__ == "__main__":
    sys.exit(main())
