"""Batch jobs behind the command line: propagate, compare, Landau-Zener
sweeps, revival scans, Dicke spectra and direct oracle evaluation.

Every job writes plain files into an output directory: CSV tables with
17 significant digits (an empty field marks missing data), and a JSON
manifest or report. Files are written to a temporary name and renamed
into place. Nothing in here depends on the clock or on random numbers, so
re-running a config reproduces every file byte for byte.
"""
import json
import math
import os
import tempfile

import numpy as np
from scipy.optimize import minimize_scalar

from . import __version__, _kernels
from . import dicke as dk
from . import oracles
from .config import ConfigError, dump_values
from .grid import make_grid
from .models import ModelSpec, adiabatic_potentials, diabatic_potentials, split_for, to_basis
from .models import lambda_adiabatic_potentials
from .observables import detect_revivals, inversion_envelope, packet_width
from .propagator import NumericalAbort, PropagationConfig, propagate
from .states import (
    MultiChannelWavefunction,
    coherent_state,
    compose_initial,
    fock_state,
    fock_superposition,
)

# ------------------------------------------------------------------ output


def fmt(x):
    """Round-trip float text; NaN (missing) becomes an empty field."""
    x = float(x)
    if math.isnan(x):
        return ""
    return "%.17g" % x


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def read_csv(path):
    """(header, float array) with empty fields read back as NaN."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [[float(v) if v else np.nan for v in line.strip().split(",")] for line in fh if line.strip()]
    return header, np.array(rows, dtype=float).reshape(len(rows), len(header))


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_json(path, obj):
    _atomic_write(path, json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


def _manifest(verb, cfg, **extra):
    out = {
        "verb": verb,
        "version": __version__,
        "backend": _kernels.BACKEND,
        "config": dump_values(cfg.values),
    }
    out.update(extra)
    return out


# ------------------------------------------------------------ propagation


def initial_state(cfg, spec, grid):
    """Product initial state of the config on ``grid`` (bare basis)."""
    init = cfg.initial
    try:
        if init.field == "fock":
            field = fock_state(init.n, grid)
        elif init.field == "coherent":
            field = coherent_state(init.nu, grid)
        else:
            c = np.asarray(init.coefficients, dtype=complex)
            field = fock_superposition(c / np.linalg.norm(c), grid)
        return compose_initial(field, init.atomic_vector(), grid)
    except ValueError as exc:
        raise NumericalAbort(f"initial state: {exc}") from None


def fock_coefficients_of(cfg):
    """Fock amplitudes of the configured field (for the JC oracle)."""
    init = cfg.initial
    if init.field == "fock":
        c = np.zeros(init.n + 1, dtype=complex)
        c[init.n] = 1.0
        return c
    if init.field == "coherent":
        return oracles.coherent_fock_coefficients(init.nu)
    c = np.asarray(init.coefficients, dtype=complex)
    return c / np.linalg.norm(c)


def run_model(cfg, spec, centroid_basis=None):
    grid = make_grid(cfg.n_points, cfg.x_max)
    psi0 = initial_state(cfg, spec, grid)
    return propagate(
        psi0,
        split_for(spec),
        cfg.propagation,
        density_every=cfg.density_every,
        centroid_basis=centroid_basis or cfg.centroid_basis,
    )


def series_table(series):
    n_ch = series.populations.shape[1]
    header = ["t", "norm", "inversion"]
    header += [f"pop_{c}" for c in range(n_ch)]
    header += [f"x_{c}" for c in range(n_ch)]
    header += [f"p_{c}" for c in range(n_ch)]
    header += ["dx", "dp", "energy"]
    jc = series.model_kind == "jc"
    if jc:
        header.append("excitations")
    rows = []
    for k in range(len(series)):
        row = [series.times[k], series.norm[k], series.inversion[k]]
        row += list(series.populations[k])
        row += list(series.x_mean[k])
        row += list(series.p_mean[k])
        row += [series.delta_x[k], series.delta_p[k], series.energy[k]]
        if jc:
            row.append(series.excitations[k])
        rows.append(row)
    return header, rows


def drifts(series):
    """Largest excursion from the initial value over the run."""
    out = {
        "norm": float(np.max(np.abs(series.norm - series.norm[0]))),
        "energy": float(np.max(np.abs(series.energy - series.energy[0]))),
    }
    if series.model_kind == "jc":
        out["excitations"] = float(np.max(np.abs(series.excitations - series.excitations[0])))
    return out


def _max_abs_delta(a, b):
    d = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    d = d[np.isfinite(d)]
    return float(d.max()) if d.size else 0.0


def convergence_deltas(coarse, fine):
    """Max |coarse - fine| per observable on the shared snapshot times."""
    n = min(len(coarse), len(fine))
    if n == 0 or not np.allclose(coarse.times[:n], fine.times[:n], rtol=0, atol=1e-9):
        raise ValueError("snapshot times of the two runs do not line up")
    out = {
        "norm": _max_abs_delta(coarse.norm[:n], fine.norm[:n]),
        "inversion": _max_abs_delta(coarse.inversion[:n], fine.inversion[:n]),
        "energy": _max_abs_delta(coarse.energy[:n], fine.energy[:n]),
        "populations": _max_abs_delta(coarse.populations[:n], fine.populations[:n]),
        "x_mean": _max_abs_delta(coarse.x_mean[:n], fine.x_mean[:n]),
        "p_mean": _max_abs_delta(coarse.p_mean[:n], fine.p_mean[:n]),
    }
    if coarse.model_kind == "jc":
        out["excitations"] = _max_abs_delta(coarse.excitations[:n], fine.excitations[:n])
    return out


def _check_convergence(cfg, spec, series, centroid_basis=None):
    fine_cfg = cfg.with_dt(0.5 * cfg.propagation.dt)
    fine = run_model(fine_cfg, spec, centroid_basis)
    deltas = convergence_deltas(series, fine)
    return {
        "dt": cfg.propagation.dt,
        "dt_half": fine_cfg.propagation.dt,
        "deltas": deltas,
        "tolerance": cfg.convergence_tolerance,
        "converged": bool(fine.valid and max(deltas.values()) <= cfg.convergence_tolerance),
    }


def _propagatable(cfg):
    if not cfg.models:
        raise ConfigError("no propagatable model in model.kind")
    return cfg.models


def run_propagate(cfg, out_dir, check_convergence=False):
    """Propagate every configured model; writes series_<kind>.csv,
    density_<kind>.csv (if requested) and manifest.json. Returns the
    manifest dict."""
    runs = {}
    for spec in _propagatable(cfg):
        entry = {}
        try:
            series = run_model(cfg, spec)
        except NumericalAbort as exc:
            runs[spec.kind] = {"status": "invalid", "abort_reason": str(exc)}
            continue
        header, rows = series_table(series)
        write_csv(os.path.join(out_dir, f"series_{spec.kind}.csv"), header, rows)
        if cfg.density_every:
            grid = make_grid(cfg.n_points, cfg.x_max)
            dhead = ["t"] + [fmt(x) for x in grid.x]
            drows = [[t] + list(r) for t, r in zip(series.density_times, series.density)]
            write_csv(os.path.join(out_dir, f"density_{spec.kind}.csv"), dhead, drows)
        entry["status"] = "ok" if series.valid else "invalid"
        entry["abort_reason"] = series.abort_reason
        entry["n_snapshots"] = len(series)
        entry["drift"] = drifts(series)
        if check_convergence and series.valid:
            entry["convergence"] = _check_convergence(cfg, spec, series)
        runs[spec.kind] = entry
    manifest = _manifest("propagate", cfg, runs=runs, status=_overall(runs))
    write_json(os.path.join(out_dir, "manifest.json"), manifest)
    return manifest


def _overall(runs):
    if any(r["status"] == "invalid" for r in runs.values()):
        return "invalid"
    if any(not r.get("convergence", {}).get("converged", True) for r in runs.values()):
        return "unconverged"
    return "ok"


# ----------------------------------------------------------------- compare


def collapse_time(times, values, window, level):
    """First time the inversion envelope drops below ``level`` (NaN if never)."""
    env = inversion_envelope(times, values, window)
    below = np.flatnonzero(env < level)
    return float(times[below[0]]) if below.size else math.nan


def rms(a):
    a = np.asarray(a, dtype=float)
    return float(np.sqrt(np.mean(a**2))) if a.size else math.nan


def run_compare(cfg, out_dir, check_convergence=False):
    """Rabi vs JC inversion on a shared time axis, plus the JC Fock-basis
    oracle. Writes compare.csv and compare.json."""
    by_kind = {s.kind: s for s in cfg.models}
    if not {"rabi", "jc"} <= set(by_kind):
        raise ConfigError("compare needs model.kind to list both rabi and jc")
    series, status = {}, {}
    for kind in ("rabi", "jc"):
        s = run_model(cfg, by_kind[kind])
        series[kind] = s
        status[kind] = {"status": "ok" if s.valid else "invalid", "abort_reason": s.abort_reason}
        if check_convergence and s.valid:
            status[kind]["convergence"] = _check_convergence(cfg, by_kind[kind], s)
    n = min(len(series["rabi"]), len(series["jc"]))
    t = series["jc"].times[:n]
    inv_r = series["rabi"].inversion[:n]
    inv_j = series["jc"].inversion[:n]
    diff = inv_r - inv_j
    jc = by_kind["jc"]
    exact = oracles.jc_inversion_exact(
        fock_coefficients_of(cfg), cfg.initial.atomic_vector(), jc.omega, jc.g0, t
    )
    exact = np.atleast_1d(exact)
    write_csv(
        os.path.join(out_dir, "compare.csv"),
        ["t", "inversion_rabi", "inversion_jc", "difference", "inversion_jc_exact"],
        zip(t, inv_r, inv_j, diff, exact),
    )
    window = cfg.values["revival.envelope_window"]
    level = cfg.values["revival.collapse_level"]
    try:
        t_col = collapse_time(t, inv_j, window, level)
    except ValueError:
        t_col = math.nan
    report = {
        "rms_difference": rms(diff),
        "max_abs_difference": float(np.max(np.abs(diff))),
        "jc_oracle_max_deviation": float(np.max(np.abs(inv_j - exact))),
        "first_collapse_time": t_col,
        "rms_difference_first_collapse": rms(diff[t <= t_col]) if math.isfinite(t_col) else None,
    }
    t_max = cfg.get("compare.t_max")
    if t_max is not None:
        report["t_max"] = t_max
        report["rms_difference_to_t_max"] = rms(diff[t <= t_max])
    runs_status = "invalid" if any(v["status"] == "invalid" for v in status.values()) else "ok"
    out = _manifest("compare", cfg, runs=status, report=report, status=runs_status)
    write_json(os.path.join(out_dir, "compare.json"), out)
    return out


# ------------------------------------------------------------ Landau-Zener


def lz_point(omega, g0, n_bar, grid, dt, boundary_tolerance=1e-8):
    """One Landau-Zener transit of a Rabi packet.

    A coherent packet with photon number ``n_bar`` relative to the diabatic
    curve d (minimum at +sqrt(2) g0) is released at rest on that curve, at
    x0 = sqrt(2) g0 + sqrt(2 n_bar). It starts on the lower adiabatic curve.
    After half an oscillation (t = pi) it sits at its far turning point, past
    the crossing; the lower-adiabatic population there is P_num.
    Returns (x0, v, P_num).
    """
    d = math.sqrt(2.0 * n_bar)
    v = oracles.diabatic_crossing_speed(g0, d)
    x0 = math.sqrt(2.0) * g0 + d
    spec = ModelSpec("rabi", omega=omega, g0=g0)
    field = coherent_state(x0 / math.sqrt(2.0), grid)
    psi0 = compose_initial(field, np.array([1.0, -1.0]) / math.sqrt(2.0), grid)
    n_steps = int(round(math.pi / dt))
    cfg = PropagationConfig(math.pi / n_steps, math.pi, n_steps, boundary_tolerance)
    last = {}

    def keep(t, amps):
        last["amps"] = amps.copy()

    series = propagate(psi0, split_for(spec), cfg, callback=keep)
    if not series.valid:
        raise NumericalAbort(series.abort_reason)
    psi = MultiChannelWavefunction(last["amps"], grid)
    p_num = float(to_basis(psi, spec, "adiabatic").populations()[1])
    return x0, v, p_num


def run_lz_sweep(cfg, out_dir):
    """Table of P_LZ against the measured adiabatic following probability."""
    omegas = cfg.require("lz.omega")
    n_bars = cfg.require("lz.n_bar")
    g0 = cfg.values["lz.g0"]
    dt = cfg.values["lz.dt"]
    if g0 <= 0:
        raise ConfigError("lz.g0 must be positive")
    grid = make_grid(cfg.n_points, cfg.x_max)
    rows, table = [], []
    for om in omegas:
        for nb in n_bars:
            rec = {"omega": om, "n_bar": nb}
            try:
                x0, v, p_num = lz_point(om, g0, nb, grid, dt, cfg.propagation.boundary_tolerance)
            except (ValueError, NumericalAbort) as exc:
                rec["skipped"] = str(exc)
                rows.append([om, g0, nb, math.nan, math.nan, math.nan, math.nan, math.nan, str(exc).replace(",", ";")])
                table.append(rec)
                continue
            p_lz = oracles.landau_zener_probability(om, g0, v) if om > 0 else 0.0
            rel = abs(p_num - p_lz) / max(p_lz, 0.05)
            rec.update(x0=x0, v=v, p_lz=p_lz, p_num=p_num, relative_deviation=rel)
            rows.append([om, g0, nb, x0, v, p_lz, p_num, rel, ""])
            table.append(rec)
    write_csv(
        os.path.join(out_dir, "lz_sweep.csv"),
        ["omega", "g0", "n_bar", "x0", "v", "p_lz", "p_num", "relative_deviation", "skipped"],
        rows,
    )
    out = _manifest("lz-sweep", cfg, rows=table, status="ok")
    write_json(os.path.join(out_dir, "lz_sweep.json"), out)
    return out


# ----------------------------------------------------------------- revivals


def revival_tolerances(cfg, spec):
    """(x_tol, p_tol); unset values default to 0.1 packet widths."""
    width = packet_width(initial_state(cfg, spec, make_grid(cfg.n_points, cfg.x_max)))
    x_tol = cfg.get("revival.x_tol") or 0.1 * width
    p_tol = cfg.get("revival.p_tol") or 0.1 * width
    return x_tol, p_tol


def run_revival_scan(cfg, out_dir):
    """Detect revivals in each configured model; JC runs from a coherent
    state are compared with the oracle revival time."""
    reports, runs_status = {}, "ok"
    window = cfg.values["revival.envelope_window"]
    level = cfg.values["revival.collapse_level"]
    for spec in _propagatable(cfg):
        if spec.n_channels != 2:
            raise ConfigError("revival scans need two-channel models")
        x_tol, p_tol = revival_tolerances(cfg, spec)
        series = run_model(cfg, spec)
        if not series.valid:
            runs_status = "invalid"
        events, env = detect_revivals(series, x_tol, p_tol, window)
        write_csv(
            os.path.join(out_dir, f"revival_{spec.kind}.csv"),
            ["t", "dx", "dp", "inversion", "envelope"],
            zip(series.times, series.delta_x, series.delta_p, series.inversion, env),
        )
        below = np.flatnonzero(env < level)
        t_col = float(series.times[below[0]]) if below.size else math.nan
        after = [e for e in events if math.isfinite(t_col) and e.time > t_col]
        rep = {
            "status": "ok" if series.valid else "invalid",
            "abort_reason": series.abort_reason,
            "centroid_basis": series.centroid_basis,
            "x_tol": x_tol,
            "p_tol": p_tol,
            "events": [
                {"time": e.time, "separation": e.separation, "envelope": e.envelope} for e in events
            ],
            "collapse_time": t_col,
            "first_revival_after_collapse": after[0].time if after else None,
        }
        if not events:
            rep["note"] = "no revival events found"
        if spec.kind == "jc" and cfg.initial.field == "coherent":
            t_rev = oracles.jc_revival_time(abs(cfg.initial.nu) ** 2, spec.omega, spec.g0)
            rep["predicted_revival_time"] = t_rev
            if after:
                rep["relative_error"] = abs(after[0].time - t_rev) / t_rev
        reports[spec.kind] = rep
    out = _manifest("revival-scan", cfg, runs=reports, status=runs_status)
    write_json(os.path.join(out_dir, "revival_scan.json"), out)
    return out


# -------------------------------------------------------------------- Dicke


def soft_mode(n_atoms, omega, g):
    """Lower normal-mode frequency eps_-(g) of the expanded Dicke model."""
    return dk.normal_modes(dk.hp_quadratic(n_atoms, omega, g))[0]


def locate_critical_coupling(n_atoms, omega, g_max, xatol=1e-10):
    """Coupling in [0, g_max] where eps_- is smallest (bounded scalar
    minimisation); returns (g, eps_-(g))."""
    res = minimize_scalar(
        lambda g: soft_mode(n_atoms, omega, g),
        bounds=(0.0, g_max),
        method="bounded",
        options={"xatol": xatol},
    )
    return float(res.x), float(res.fun)


def run_dicke_spectrum(cfg, out_dir):
    n_atoms = cfg.values["dicke.n_atoms"]
    omega = cfg.require("dicke.omega")
    convention = cfg.values["dicke.convention"]
    if n_atoms < 1:
        raise ConfigError("dicke.n_atoms must be >= 1")
    if omega <= 0:
        raise ConfigError("dicke.omega must be positive")
    gc = dk.critical_coupling(omega)
    g_max = cfg.get("dicke.g_max") or 2.0 * gc
    n_g = cfg.values["dicke.n_g"]
    if n_g < 2:
        raise ConfigError("dicke.n_g must be >= 2")
    rows = []
    for g in np.linspace(0.0, g_max, n_g):
        mu, alpha, beta = dk.hp_parameters(n_atoms, omega, g)
        try:
            em, ep = dk.normal_modes(dk.hp_quadratic(n_atoms, omega, g))
        except dk.UnstableQuadraticForm:
            em, ep = math.nan, math.nan
        rows.append([g, mu, alpha, beta, em, ep])
    write_csv(
        os.path.join(out_dir, "dicke_spectrum.csv"),
        ["g0", "mu", "alpha", "beta", "eps_minus", "eps_plus"],
        rows,
    )
    x = np.linspace(-cfg.values["dicke.x_max"], cfg.values["dicke.x_max"], cfg.values["dicke.n_x"])
    couplings = (0.5 * gc, gc, 1.5 * gc)
    header, cols = ["x"], [x]
    for g in couplings:
        for m, v in dk.dicke_adiabatic_potentials(x, n_atoms, omega, g, convention).items():
            header.append(f"V_m{m:+d}_g{fmt(g)}")
            cols.append(v)
    write_csv(os.path.join(out_dir, "dicke_potentials.csv"), header, np.column_stack(cols))
    g_star, eps_star = locate_critical_coupling(n_atoms, omega, g_max)
    out = _manifest(
        "dicke-spectrum",
        cfg,
        critical_coupling=gc,
        located_critical_coupling=g_star,
        eps_minus_at_located=eps_star,
        potential_couplings=list(couplings),
        status="ok",
    )
    write_json(os.path.join(out_dir, "dicke_spectrum.json"), out)
    return out


# ------------------------------------------------------------------ oracles


def run_oracle(cfg, out_dir):
    """Closed-form quantities for every configured model, and potential
    curves on the config grid (adiabatic and diabatic families for Rabi,
    dark and bright curves for Lambda)."""
    grid = make_grid(cfg.n_points, cfg.x_max)
    x = grid.x
    results = {}
    for spec in _propagatable(cfg):
        res = {}
        if spec.kind == "jc":
            res["ground_energy"] = oracles.jc_ground_energy(spec.omega)
            res["sectors"] = [
                {"n": n, "e_plus": p.e_plus, "e_minus": p.e_minus, "rabi_frequency": p.rabi_frequency}
                for n, p in ((n, oracles.jc_eigensystem(n, spec.omega, spec.g0)) for n in range(1, 11))
            ]
            if cfg.initial.field == "coherent" and abs(cfg.initial.nu) ** 2 >= 3:
                nbar = abs(cfg.initial.nu) ** 2
                res["n_bar"] = nbar
                res["revival_time"] = oracles.jc_revival_time(nbar, spec.omega, spec.g0)
                t_cl, t_rev, t_sup = oracles.time_scales(
                    lambda n: n + oracles.jc_rabi_frequency(n, spec.omega, spec.g0),
                    int(round(nbar)),
                )
                res["time_scales_upper_branch"] = {"T_cl": t_cl, "T_rev": t_rev, "T_sup": t_sup}
        elif spec.kind == "rabi":
            v_dp, v_dm = diabatic_potentials(spec, x)
            cols = [x, v_dp, v_dm]
            header = ["x", "V_d_plus", "V_d_minus"]
            if spec.omega > 0:
                v_ap, v_am = adiabatic_potentials(spec, x)
                cols += [v_ap, v_am]
                header += ["V_ad_plus", "V_ad_minus"]
            write_csv(os.path.join(out_dir, "potentials_rabi.csv"), header, np.column_stack(cols))
            if cfg.initial.field == "coherent" and spec.g0 > 0:
                nbar = abs(cfg.initial.nu) ** 2
                try:
                    v = oracles.crossing_velocity(spec.g0, n_bar=nbar)
                    res["crossing_velocity"] = v
                    res["landau_zener_probability"] = (
                        oracles.landau_zener_probability(spec.omega, spec.g0, v) if spec.omega > 0 else 0.0
                    )
                except ValueError as exc:
                    res["crossing_velocity_error"] = str(exc)
        elif spec.kind == "lambda":
            if spec.omega > 0 and (spec.lambda1 or spec.lambda2):
                vp, v0, vm = lambda_adiabatic_potentials(spec, x)
                write_csv(
                    os.path.join(out_dir, "potentials_lambda.csv"),
                    ["x", "V_plus", "V_dark", "V_minus"],
                    np.column_stack([x, vp, v0, vm]),
                )
        results[spec.kind] = res
    out = _manifest("oracle", cfg, results=results, status="ok")
    write_json(os.path.join(out_dir, "oracle.json"), out)
    return out
