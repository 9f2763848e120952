"""Command line interface: ``conecocycle <subcommand> --config FILE``.

Subcommands: ``density``, ``exponent``, ``response``, ``dimension``,
``cone-check``. Each writes ``<subcommand>.csv`` and ``summary.json`` to
``--out``; both start with a ``#`` comment carrying the tool version and the
SHA-256 of the config file. Exit status: 0 success, 2 invalid input,
3 numerical failure, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .cocycle import characteristic_exponent, decay_rate, equivariant_density
from .cones import contraction_certificate, find_invariant_cone, invariance_check, ConeParams
from .config import ExperimentConfig, load_config
from .dimension import bowen_root, box_counting_oracle, dimension_derivative
from .errors import ConeCocycleError, NumericalError, ValidationError
from .maps import ACIM, Weight
from .response import annealed_response, quenched_response
from .transfer import TransferOperator

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_USAGE = 0, 2, 3, 64
WORKERS_ENV = "CONECOCYCLE_WORKERS"
log = logging.getLogger("conecocycle")


def fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return format(float(v), ".17g")


def header(cfg: ExperimentConfig) -> str:
    return f"# conecocycle {__version__} config-sha256={cfg.sha256}\n"


def write_csv(path: Path, cfg: ExperimentConfig, columns: Sequence[str], rows: Iterable[Sequence]) -> None:
    lines = [header(cfg), ",".join(columns) + "\n"]
    lines += [",".join(fmt(v) for v in row) + "\n" for row in rows]
    path.write_text("".join(lines))


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        return float(v) if math.isfinite(v) else None
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def write_summary(path: Path, cfg: ExperimentConfig, summary: dict) -> str:
    body = json.dumps(_jsonable(summary), indent=2, sort_keys=True)
    path.write_text(header(cfg) + body + "\n")
    return body


def read_summary(path: str | Path) -> dict:
    """Parse a ``summary.json`` written by this tool (skips the comment line)."""
    text = Path(path).read_text()
    return json.loads("".join(line for line in text.splitlines(True) if not line.startswith("#")))


def read_csv(path: str | Path) -> tuple[list, np.ndarray]:
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    cols = lines[0].split(",")
    data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]]).reshape(-1, len(cols))
    return cols, data


def _weight(cfg: ExperimentConfig):
    kind = cfg.get("weight")
    if kind is None:
        return None
    if kind == "acim":
        return ACIM
    if kind == "geometric":
        return Weight.geometric(float(cfg.get("t", 1.0)))
    raise ValidationError(f"run: unknown weight {kind!r}")


# ---------------------------------------------------------------------------
# subcommands


def cmd_density(cfg: ExperimentConfig, out: Path, workers: int):
    coc = cfg.cocycle()
    u = cfg.get("u")
    coc.warm(u, _weight(cfg), workers)
    window = tuple(cfg.get("window", [-8, 0]))
    r = equivariant_density(coc, u, int(cfg.get("depth", 60)), cfg.positive("tol", 1e-12), window, _weight(cfg))
    rows = [(k, x, v) for k in r.density.times for x, v in zip(r.density[k].nodes, r.density[k].values)]
    write_csv(out / "density.csv", cfg, ["k", "x", "f"], rows)
    return {"chi": r.chi, "eta_measured": r.eta_measured, "residual": r.residual, "depth": r.depth, "window": list(window)}


def cmd_exponent(cfg: ExperimentConfig, out: Path, workers: int):
    coc = cfg.cocycle()
    u, w = cfg.get("u"), _weight(cfg)
    coc.warm(u, w, workers)
    depth = int(cfg.get("depth", 60))
    e = characteristic_exponent(coc, u, w, int(cfg.get("orbit_len", 1000)), depth)
    r = equivariant_density(coc, u, depth, cfg.positive("tol", 1e-12), (0, 0), w)
    write_csv(out / "exponent.csv", cfg, ["k", "log_p_k"], [(k + 1, v) for k, v in enumerate(e.log_p)])
    return {"chi": e.chi, "stderr": e.stderr, "eta_measured": r.eta_measured, "residual": r.residual, "depth": depth, "orbit_len": len(e.log_p)}


def cmd_response(cfg: ExperimentConfig, out: Path, workers: int):
    coc = cfg.cocycle()
    u0 = float(cfg.get("u", 0.0))
    psi = cfg.observable()
    tol = cfg.positive("series_tol", 1e-9)
    h = cfg.positive("h", 1e-3)
    if cfg.get("annealed", False):
        rep = annealed_response(coc, u0, psi, tol, int(cfg.get("n_orbits", 16)), h, workers)
        write_csv(out / "response.csv", cfg, ["sample", "series_value"], list(enumerate(rep.terms)))
    else:
        rep = quenched_response(coc, u0, psi, tol, h, bool(cfg.get("richardson", False)))
        write_csv(out / "response.csv", cfg, ["n", "partial_sum"], list(enumerate(rep.terms)))
    return rep.summary()


def cmd_dimension(cfg: ExperimentConfig, out: Path, workers: int):
    coc = cfg.cocycle()
    u = cfg.get("u")
    tol_t = cfg.positive("tol_t", 1e-10)
    orbit_len, depth = int(cfg.get("orbit_len", 1000)), int(cfg.get("depth", 60))
    curve = bowen_root(coc, u, tol_t, orbit_len, depth, tuple(cfg.get("bracket", [0.0, 1.0])), int(cfg.get("samples", 11)), workers)
    write_csv(out / "dimension.csv", cfg, ["t", "chi", "stderr"], zip(curve.t_samples, curve.chi_values, curve.stderr_values))
    summary = curve.summary()
    if cfg.get("derivative", False):
        d = dimension_derivative(coc, float(u or 0.0), tol_t, orbit_len, depth, root=curve.root)
        summary.update(dz_du=d.value, d_u_chi=d.d_u_chi, d_t_chi=d.d_t_chi)
    if cfg.get("box_depth"):
        b = box_counting_oracle(coc, u, int(cfg.get("box_depth")), cfg.get("box_eps"))
        summary.update(box_counting_slope=b.slope, box_counting_residual=b.residual)
    return summary


def cmd_cone_check(cfg: ExperimentConfig, out: Path, workers: int):
    u = cfg.get("u")
    coc = cfg.cocycle()
    labels = list(cfg.env.alphabet)
    ops = [TransferOperator(coc.system(a, u), cfg.basis, cfg.n) for a in labels]
    metrics = {coc.system(a).metric for a in labels}
    if len(metrics) > 1:
        raise ValidationError("cone-check needs systems sharing one metric")
    metric = metrics.pop()
    k, alpha = int(cfg.get("k", 1)), float(cfg.get("alpha", 1.0))
    sigma, delta1 = float(cfg.get("sigma", 0.8)), float(cfg.get("delta1", 1.0 / 3.0))
    seed = int(cfg.get("cone_seed", cfg.env.seed))
    if cfg.get("a") is not None:
        cone = ConeParams(tuple(cfg.get("a")), k, alpha, sigma, delta1, metric)
    else:
        cone = find_invariant_cone(ops, k, alpha, sigma, delta1, metric, seed=seed)
    samples = int(cfg.get("cone_samples", 100))
    inv = invariance_check(ops, cone, min(samples, 50), seed + 2)
    which = cfg.get("metric", "cone")
    rows, per = [], {}
    for label, L in zip(labels, ops):
        c = contraction_certificate(L, cone, samples, seed + 3, which)
        per[label] = c.to_dict()
        rows += [(labels.index(label), i, r) for i, r in enumerate(c.ratios)]
    write_csv(out / "cone-check.csv", cfg, ["system", "pair", "ratio"], rows)
    summary = {
        "a": list(cone.a),
        "k": k,
        "alpha": alpha,
        "sigma": sigma,
        "rho": cone.rho_value,
        "K": cone.K_value,
        "R": cone.R_value,
        "diameter_bound": cone.diameter_bound(),
        "eta_bound": cone.eta_bound(),
        "invariance_ok": inv.ok,
        "invariance_min_margin": min(inv.min_margins),
        "certificates": per,
        "labels": labels,
    }
    if cfg.get("decay_steps"):
        probe = cfg.observable("probe")
        d = decay_rate(coc, probe, int(cfg.get("decay_steps")), u, cone.eta_bound())
        summary.update(decay_slope=d.slope, decay_within_bound=d.within_bound)
    return summary


COMMANDS = {
    "density": cmd_density,
    "exponent": cmd_exponent,
    "response": cmd_response,
    "dimension": cmd_dimension,
    "cone-check": cmd_cone_check,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="conecocycle", description="Cone-contraction computations for random expanding maps.")
    p.add_argument("--version", action="version", version=f"conecocycle {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="TOML experiment file")
        s.add_argument("--out", default=".", help="output directory (default: current)")
        s.add_argument("--workers", type=int, default=int(os.environ.get(WORKERS_ENV, "1")),
                       help=f"thread count (default: ${WORKERS_ENV} or 1)")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr, format="%(message)s")
    try:
        if args.workers < 1:
            raise ValidationError("--workers must be >= 1")
        cfg = load_config(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        log.info("running %s on %s", args.command, args.config)
        summary = COMMANDS[args.command](cfg, out, args.workers)
        summary = {"subcommand": args.command, **summary}
        print(write_summary(out / "summary.json", cfg, summary))
        return EXIT_OK
    except (ValidationError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"conecocycle: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericalError, ConeCocycleError, FloatingPointError) as exc:
        print(f"conecocycle: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
