"""Serialization of fits, selections and Monte Carlo results.

JSON floats are written with ``repr`` (shortest round-trip form, at most 17
significant digits), so reloading reproduces every value bit for bit.
"""

from __future__ import annotations

import csv
import io
import json
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import numpy as np

from .datasets import SelectionResult
from .errors import IoError, ValidationError
from .estimation import FitResult, covariance_estimate
from .inference import AsymptoticReport
from .simulation import ConsistencyRow, McReport

__all__ = ["FORMATS", "emit_report", "fit_result_from_dict", "load_json", "render", "to_jsonable"]

FORMATS = ("json", "text", "csv", "svg")
_EXT = {"json": "json", "text": "txt", "csv": "csv", "svg": "svg"}
MODEL_LABELS = {"u": "ψ_u", "o": "ψ_o", "a": "ψ_a"}


def _arr(a) -> Any:
    return None if a is None else np.asarray(a, dtype=float).tolist()


def _mc_list(result) -> list[McReport] | None:
    if isinstance(result, McReport):
        return [result]
    if isinstance(result, Sequence) and result and all(isinstance(r, McReport) for r in result):
        return list(result)
    return None


def to_jsonable(result: Any) -> dict[str, Any]:
    if isinstance(result, FitResult):
        return {
            "kind": "fit",
            "coefficients": [_arr(c) for c in result.coefficients],
            "mean_hat": _arr(result.mean_hat),
            "residual": _arr(result.residual),
            "rmss": result.rmss,
            "aic": result.aic,
            "n_params": result.n_params,
            "sigma_hat": _arr(result.covariance.sigma_hat),
            "r": result.covariance.r,
            "h_matrices": [_arr(h) for h in result.h_matrices],
        }
    if isinstance(result, SelectionResult):
        return {
            "kind": "selection",
            "groups": list(result.group_order),
            "best": None if result.best is None else list(result.best),
            "ties": [list(t) for t in result.ties],
            "grid": [
                {
                    "degrees": list(e.degrees),
                    "aic": e.aic,
                    "n_params": e.n_params,
                    "rmss": e.rmss,
                    "error": e.error,
                }
                for e in result.grid
            ],
        }
    if isinstance(result, AsymptoticReport):
        return {
            "kind": "normality",
            "block": result.block,
            "n": result.n,
            "replications": result.replications,
            "failures": result.failures,
            "row_factor": _arr(result.row_factor),
            "column_factor": _arr(result.column_factor),
            "theoretical": _arr(result.theoretical),
            "empirical": _arr(result.empirical),
            "relative_error": result.relative_error,
            "cross_block_z": {str(j): _arr(z) for j, z in result.cross_block_z.items()},
            "cross_sigma_z": _arr(result.cross_sigma_z),
            "marginal_skewness": _arr(result.marginal_skewness),
            "marginal_excess_kurtosis": _arr(result.marginal_excess_kurtosis),
            "statistic_mean": _arr(result.statistic_mean),
            "statistic_variance": _arr(result.statistic_variance),
            "phi2_empirical": _arr(result.phi2_empirical),
            "phi2_theoretical": _arr(result.phi2_theoretical),
        }
    if isinstance(result, Sequence) and result and all(isinstance(r, ConsistencyRow) for r in result):
        return {
            "kind": "consistency",
            "rows": [
                {
                    "n": r.n,
                    "sigma_error": r.sigma_error,
                    "theta_error": list(r.theta_error),
                    "replications": r.replications,
                    "failures": r.failures,
                }
                for r in result
            ],
        }
    reports = _mc_list(result)
    if reports is not None:
        return {
            "kind": "mc_aic",
            "reports": [
                {
                    "n": r.n,
                    "rho": r.rho,
                    "seed": r.seed,
                    "replications": r.replications,
                    "failures": r.failures,
                    "aic": dict(r.aic),
                    "aic_sd": dict(r.aic_sd),
                    "n_params": dict(r.n_params),
                    "runtime_s": r.runtime_s,
                }
                for r in reports
            ],
        }
    raise ValidationError(f"cannot serialize {type(result).__name__}")


def fit_result_from_dict(d: dict[str, Any]) -> FitResult:
    """Rebuild a :class:`FitResult` from its JSON form."""
    if d.get("kind") != "fit":
        raise ValidationError("not a serialized fit result")
    return FitResult(
        coefficients=tuple(np.array(c, dtype=float) for c in d["coefficients"]),
        mean_hat=np.array(d["mean_hat"], dtype=float),
        residual=np.array(d["residual"], dtype=float),
        rmss=float(d["rmss"]),
        aic=float(d["aic"]),
        n_params=int(d["n_params"]),
        covariance=covariance_estimate(np.array(d["sigma_hat"], dtype=float), int(d["r"])),
        h_matrices=tuple(np.array(h, dtype=float) for h in d["h_matrices"]),
    )


def load_json(path: str | Path) -> dict[str, Any]:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc


# -- text ---------------------------------------------------------------------


def _fmt(v: float | None, width: int = 10, prec: int = 4) -> str:
    return f"{'-':>{width}}" if v is None else f"{v:>{width}.{prec}f}"


def _selection_text(res: SelectionResult) -> str:
    lines = []
    two_groups = res.grid and len(res.grid[0].degrees) == 2
    if two_groups:
        firsts = sorted({e.degrees[0] for e in res.grid})
        seconds = sorted({e.degrees[1] for e in res.grid})
        head = "".join(f"{'(g, b)':<8}{'AIC':>11}   " for _ in seconds)
        lines += [head.rstrip(), "-" * len(head.rstrip())]
        for g in firsts:
            cells = []
            for b in seconds:
                e = res.entry((g, b))
                mark = "*" if res.best == e.degrees else " "
                cells.append(f"{f'({g}, {b})':<8}{_fmt(e.aic, 10)}{mark}  ")
            lines.append("".join(cells).rstrip())
    else:
        lines.append(f"{'degrees':<16}{'AIC':>11}{'params':>8}{'RMSS':>12}")
        for e in res.grid:
            mark = "*" if res.best == e.degrees else " "
            lines.append(f"{e.degrees!s:<16}{_fmt(e.aic)}{mark}{e.n_params or 0:>7}{_fmt(e.rmss, 12)}")
    if res.best is None:
        lines.append("no valid candidate model")
    else:
        lines.append(f"best: {res.best}" + (f"  (ties: {list(res.ties)})" if res.ties else ""))
    for e in res.invalid:
        lines.append(f"invalid {e.degrees}: {e.error}")
    return "\n".join(lines) + "\n"


def _fit_text(res: FitResult) -> str:
    out = io.StringIO()
    with np.printoptions(precision=6, suppress=True, linewidth=100):
        for i, c in enumerate(res.coefficients):
            out.write(f"Theta[{i}] =\n{c}\n")
        out.write(f"Sigma_hat (r = {res.covariance.r}) =\n{res.covariance.sigma_hat}\n")
    out.write(f"RMSS     = {res.rmss:.6f}\n")
    out.write(f"n_params = {res.n_params}\n")
    out.write(f"AIC      = {res.aic:.4f}\n")
    return out.getvalue()


def _mc_text(reports: list[McReport]) -> str:
    lines = [
        f"rho = {reports[0].rho}   seed = {reports[0].seed}",
        f"{'n':>6}{'AIC(u)':>12}{'AIC(o)':>12}{'AIC(a)':>12}{'o - a':>9}{'u - a':>9}{'reps':>7}{'fail':>6}",
    ]
    for r in reports:
        lines.append(
            f"{r.n:>6}{r.aic['u']:>12.4f}{r.aic['o']:>12.4f}{r.aic['a']:>12.4f}"
            f"{r.gap('o'):>9.3f}{r.gap('u'):>9.3f}{r.replications:>7}{r.failures:>6}"
        )
    return "\n".join(lines) + "\n"


def _consistency_text(rows: list[ConsistencyRow]) -> str:
    k = len(rows[0].theta_error)
    lines = [f"{'n':>6}{'|S - S0|max':>14}" + "".join(f"{f'|T{i} - T{i}0|max':>16}" for i in range(k))]
    for r in rows:
        lines.append(f"{r.n:>6}{r.sigma_error:>14.5f}" + "".join(f"{e:>16.5f}" for e in r.theta_error))
    return "\n".join(lines) + "\n"


def _tidy(a: np.ndarray) -> np.ndarray:
    """Zero out rounding dust so it does not print as ``-0.``."""
    a = np.asarray(a, dtype=float)
    return np.where(np.abs(a) <= 1e-12 * np.max(np.abs(a), initial=0.0), 0.0, a)


def _normality_text(rep: AsymptoticReport) -> str:
    out = io.StringIO()
    with np.printoptions(precision=4, suppress=True, linewidth=100):
        out.write(f"block {rep.block}, n = {rep.n}, replications = {rep.replications}\n")
        out.write(f"theoretical covariance =\n{_tidy(rep.theoretical)}\nempirical covariance =\n{_tidy(rep.empirical)}\n")
        out.write(f"relative max-entry error = {rep.relative_error:.4f}\n")
        for j, z in rep.cross_block_z.items():
            out.write(f"max |z| cross-covariance with block {j} = {np.max(np.abs(z)):.3f}\n")
        if rep.cross_sigma_z is not None:
            out.write(f"max |z| cross-covariance with Sigma_hat = {np.max(np.abs(rep.cross_sigma_z)):.3f}\n")
        out.write(f"skewness = {rep.marginal_skewness}\nexcess kurtosis = {rep.marginal_excess_kurtosis}\n")
        out.write(f"statistic mean = {rep.statistic_mean}\nstatistic variance = {rep.statistic_variance}\n")
    return out.getvalue()


# -- csv / svg ----------------------------------------------------------------


def _csv(rows: list[list[Any]]) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _mc_svg(reports: list[McReport]) -> str:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "agcm", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        ns = [r.n for r in reports]
        for key, style in (("u", "s-"), ("o", "^-"), ("a", "o-")):
            ax.plot(ns, [r.aic[key] for r in reports], style, label=f"AIC({MODEL_LABELS[key]})")
        ax.set_xlabel("sample size n")
        ax.set_ylabel("average AIC")
        ax.set_title(f"rho = {reports[0].rho}")
        ax.legend()
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    return buf.getvalue()


def render(result: Any, fmt: str) -> str:
    """Render ``result`` in one of :data:`FORMATS`."""
    if fmt not in FORMATS:
        raise ValidationError(f"unknown format {fmt!r}")
    if fmt == "json":
        return json.dumps(to_jsonable(result), indent=2, sort_keys=True, allow_nan=True) + "\n"
    reports = _mc_list(result)
    if fmt == "svg":
        if reports is None:
            raise ValidationError("svg output is only available for Monte Carlo AIC reports")
        return _mc_svg(reports)
    if fmt == "text":
        if isinstance(result, FitResult):
            return _fit_text(result)
        if isinstance(result, SelectionResult):
            return _selection_text(result)
        if isinstance(result, AsymptoticReport):
            return _normality_text(result)
        if reports is not None:
            return _mc_text(reports)
        if isinstance(result, Sequence) and result and isinstance(result[0], ConsistencyRow):
            return _consistency_text(list(result))
    if fmt == "csv":
        if reports is not None:
            rows = [["n", "aic_u", "aic_o", "aic_a", "replications", "failures"]]
            rows += [[r.n, repr(r.aic["u"]), repr(r.aic["o"]), repr(r.aic["a"]), r.replications, r.failures] for r in reports]
            return _csv(rows)
        if isinstance(result, SelectionResult):
            k = len(result.grid[0].degrees) if result.grid else 0
            rows = [[f"degree_{i + 1}" for i in range(k)] + ["aic", "n_params", "rmss", "error"]]
            for e in result.grid:
                rows.append(list(e.degrees) + [repr(e.aic) if e.valid else "", e.n_params or "", repr(e.rmss) if e.valid else "", e.error or ""])
            return _csv(rows)
        if isinstance(result, FitResult):
            return _csv([[repr(float(v)) for v in row] for row in result.mean_hat])
        if isinstance(result, Sequence) and result and isinstance(result[0], ConsistencyRow):
            k = len(result[0].theta_error)
            rows = [["n", "sigma_error"] + [f"theta_error_{i}" for i in range(k)]]
            rows += [[r.n, repr(r.sigma_error)] + [repr(e) for e in r.theta_error] for r in result]
            return _csv(rows)
    raise ValidationError(f"{fmt} output is not available for {type(result).__name__}")


def emit_report(
    result: Any,
    out_dir: str | Path,
    formats: Sequence[str] = ("json", "text"),
    stem: str = "report",
) -> dict[str, Path]:
    """Write ``stem.<ext>`` files to ``out_dir``; returns the paths by format.

    A Monte Carlo report requested as ``svg`` also gets its CSV data file.
    Everything is rendered before anything is written.
    """
    formats = list(dict.fromkeys(formats))
    if "svg" in formats and "csv" not in formats and _mc_list(result) is not None:
        formats.append("csv")
    rendered = {fmt: render(result, fmt) for fmt in formats}
    out = Path(out_dir)
    paths = {}
    try:
        out.mkdir(parents=True, exist_ok=True)
        for fmt, text in rendered.items():
            path = out / f"{stem}.{_EXT[fmt]}"
            path.write_text(text, encoding="utf-8")
            paths[fmt] = path
    except OSError as exc:
        raise IoError(f"cannot write report to {out}: {exc}") from exc
    return paths
