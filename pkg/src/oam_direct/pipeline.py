"""
End-to-end runs behind the command line: the direct measurement of the
aperture state (unrotated and rotated by +/- theta0), re-analysis of saved
reconstructions, sorter characterization and plot-ready tables.

Every artifact is plain UTF-8 text with LF endings (mask arrays aside) and
carries no timestamps, so equal configs give byte-identical bundles.
"""
import csv
import hashlib
import io
import json
import platform
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .analysis import (ReconstructedState, amplitude_mask, detect_pi_jumps, fit_phase_linear_chi2,
                       fit_phase_quadratic, fit_sinc_squared, fits_to_json, phase_difference,
                       renormalize_scan, sinc_squared_model)
from .detection import NoiseSpec, average_runs, noisy_scan, simulate_counts
from .errors import MissingInputError
from .optics.fanout import design_fanout, farfield_orders
from .optics.sorter import SorterChain, SorterGeometry, crosstalk_from_profiles, element_masks
from .states import aperture_state, rotate_state
from .weak import aberration_phases, direct_measure, pointer_states

DATASETS = (("unrotated", 0), ("plus", 1), ("minus", -1))


class RunLog:
    def __init__(self):
        self.lines = []

    def __call__(self, msg):
        self.lines.append(msg)

    def text(self):
        return "\n".join(self.lines) + "\n"


def _write(out, name, text):
    path = Path(out) / name
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def _dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _manifest(cfg, command, files):
    return {
        "command": command,
        "config": cfg.portable_dict(),
        "config_sha256": cfg.digest(),
        "files": {name: hashlib.sha256(text.encode()).hexdigest() for name, text in sorted(files.items())},
        "versions": {"oam_direct": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
    }


def noise_spec(cfg):
    nz = cfg["noise"]
    return NoiseSpec(photons_per_setting=nz["photons_per_setting"], dark_rate=nz["dark_rate_hz"],
                     integration_time=nz["integration_s"], background_rate=nz["background_rate_hz"],
                     seed=nz["seed"])


def prepared_states(cfg):
    """The aperture state and its two rotations, keyed by dataset name."""
    st = cfg["state"]
    base = aperture_state(st["delta_theta"], st["l_max"])
    return {name: rotate_state(base, sign * st["theta0"]) for name, sign in DATASETS}


def measure_scans(cfg, log=None):
    """Weak-value scans (run-averaged when noisy) and the first run's counts."""
    log = log or (lambda msg: None)
    ms = cfg["measurement"]
    l_max = cfg["state"]["l_max"]
    noise = noise_spec(cfg)
    scans, counts = {}, {}
    for stream, (name, state) in enumerate(prepared_states(cfg).items()):
        # defocus and tilt are common to all datasets; drift_tilt hits the rotated ones only
        tilt = ms["tilt"] + (ms["drift_tilt"] if name != "unrotated" else 0.0)
        phases = aberration_phases(l_max, ms["defocus"], tilt) if ms["defocus"] or tilt else None
        if cfg["noise"]["noiseless"]:
            scans[name] = direct_measure(state, ms["alpha"], ms["theta_index"], phases)
            log(f"{name}: noiseless scan over {state.d} modes")
            continue
        pointers = pointer_states(state, ms["alpha"], ms["theta_index"], phases)
        runs = [noisy_scan(pointers, ms["alpha"], noise, run, stream) for run in range(ms["runs"])]
        scans[name] = average_runs(runs)
        counts[name] = simulate_counts(pointers, noise, 0, stream)
        log(f"{name}: averaged {ms['runs']} runs over {state.d} modes (stream {stream})")
    return scans, counts


def _err_or_none(err):
    return None if np.all(err == 0) else err


def analyze_reconstructions(recons):
    """Fits and summary from the three reconstructions.

    Zero uncertainties everywhere (a noiseless run) switch to unweighted
    fits with residual-scaled errors.
    """
    ref = recons["unrotated"]
    mask = amplitude_mask(ref)
    fits = {
        "sinc": fit_sinc_squared(ref.ells, ref.prob_density, _err_or_none(ref.prob_err)),
        "quadratic": fit_phase_quadratic(ref.ells, ref.phase, _err_or_none(ref.phase_err), mask),
    }
    for name in ("plus", "minus"):
        dphi, err = phase_difference(recons[name], ref)
        fits[f"linear_{name}"] = fit_phase_linear_chi2(ref.ells, dphi, _err_or_none(err), mask)
    summary = {
        "fit_mask": sorted(mask),
        "pi_jumps": {name: sorted(detect_pi_jumps(rc)) for name, rc in recons.items()},
        "sinc_width": [fits["sinc"]["width"], fits["sinc"].err("width")],
        "slopes": {name: [fits[f"linear_{name}"]["slope"], fits[f"linear_{name}"].err("slope")]
                   for name in ("plus", "minus")},
    }
    return fits, summary


def run_direct_measurement(cfg, out=None):
    """Run the measurement; returns ``{file name: text}`` and writes it to ``out`` if given."""
    log = RunLog()
    log(f"config sha256 {cfg.digest()}")
    scans, counts = measure_scans(cfg, log)
    recons = {name: renormalize_scan(scan) for name, scan in scans.items()}
    fits, summary = analyze_reconstructions(recons)
    log(f"sinc width {summary['sinc_width'][0]!r} +/- {summary['sinc_width'][1]!r}")
    for name, (slope, err) in summary["slopes"].items():
        log(f"slope {name} {slope!r} +/- {err!r}")
    log(f"pi jumps {summary['pi_jumps']['unrotated']}")

    files = {}
    formats = cfg["output"]["formats"]
    for name in scans:
        if "csv" in formats:
            files[f"scan_{name}.csv"] = scans[name].to_csv()
        files[f"reconstruction_{name}.csv"] = recons[name].to_csv()
        if cfg["output"]["counts"] and name in counts:
            files[f"counts_{name}_run0.csv"] = counts[name].to_csv()
    if "json" in formats:
        files["fits.json"] = fits_to_json(fits)
        files["summary.json"] = _dumps(summary)
    files["run.log"] = log.text()
    files["manifest.json"] = _dumps(_manifest(cfg, "measure", files))
    if out is not None:
        for name, text in files.items():
            _write(out, name, text)
    return files


def _read(directory, name):
    path = Path(directory) / name
    if not path.is_file():
        raise MissingInputError(f"missing bundle member: {path}")
    return path.read_text(encoding="utf-8")


def load_reconstructions(directory):
    return {name: ReconstructedState.from_csv(_read(directory, f"reconstruction_{name}.csv"))
            for name, _ in DATASETS}


def analyze_bundle(directory, out=None):
    """Re-fit saved reconstructions; writes fits.json and summary.json."""
    fits, summary = analyze_reconstructions(load_reconstructions(directory))
    files = {"fits.json": fits_to_json(fits), "summary.json": _dumps(summary)}
    for name, text in files.items():
        _write(out or directory, name, text)
    return files


def _table(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["x", "y", "yerr", "series"])
    for x, y, yerr, series in rows:
        writer.writerow([repr(float(x)) if not float(x).is_integer() else int(x),
                         repr(float(y)), repr(float(yerr)), series])
    return buf.getvalue()


def _scan_rows(text):
    rows = list(csv.DictReader(io.StringIO(text)))
    out = [(int(r["ell"]), float(r["re_w"]), float(r["err_re"]), "re") for r in rows]
    return out + [(int(r["ell"]), float(r["im_w"]), float(r["err_im"]), "im") for r in rows]


def emit_plot_data(directory, out=None):
    """Long-format tables (x, y, yerr, series) per figure panel.

    fig2a-c: weak values, probability and phase of the unrotated state;
    fig3a-c and fig3d-f: the same for +theta0 and -theta0 with the phase
    panel showing the difference from the unrotated phase.  Fit curves go
    to ``*_fit.csv`` companions.
    """
    recons = load_reconstructions(directory)
    fits = json.loads(_read(directory, "fits.json"))
    ref = recons["unrotated"]
    xs = np.linspace(ref.ells.min(), ref.ells.max(), 201)
    sinc = fits["sinc"]["params"]
    quad = fits["quadratic"]["params"]
    files = {}
    panels = {"unrotated": ("fig2a", "fig2b", "fig2c"), "plus": ("fig3a", "fig3b", "fig3c"),
              "minus": ("fig3d", "fig3e", "fig3f")}
    for name, (pa, pb, pc) in panels.items():
        rc = recons[name]
        files[f"{pa}.csv"] = _table(_scan_rows(_read(directory, f"scan_{name}.csv")))
        files[f"{pb}.csv"] = _table(zip(rc.ells, rc.prob_density, rc.prob_err, ["measured"] * rc.ells.size))
        if name == "unrotated":
            y, yerr = rc.phase, rc.phase_err
            fit_y = quad["a"]["value"] * xs**2 + quad["b"]["value"] * xs + quad["c"]["value"]
        else:
            y, yerr = phase_difference(rc, ref)
            lin = fits[f"linear_{name}"]["params"]
            fit_y = lin["slope"]["value"] * xs + lin["intercept"]["value"]
        files[f"{pc}.csv"] = _table(zip(rc.ells, y, yerr, ["measured"] * rc.ells.size))
        files[f"{pc}_fit.csv"] = _table(zip(xs, fit_y, np.zeros_like(xs), ["fit"] * xs.size))
    fit_b = sinc_squared_model(xs, sinc["amplitude"]["value"], sinc["width"]["value"])
    files["fig2b_fit.csv"] = _table(zip(xs, fit_b, np.zeros_like(xs), ["fit"] * xs.size))
    target = Path(out or directory) / "plotdata"
    for fname, text in sorted(files.items()):
        _write(target, fname, text)
    return files


def sorter_geometry(cfg):
    so = cfg["sorter"]
    auto = SorterGeometry.default(so["grid"], so["pitch_m"], so["wavelength_m"], so["waist_m"], so["f_m"],
                                  so["strip_fraction"])
    return SorterGeometry(a=so["a_m"] or auto.a, b=so["b_m"] or auto.b, f=so["f_m"], n_index=so["n_index"])


def sorter_chains(cfg, fanout=None):
    so = cfg["sorter"]
    kw = dict(geom=sorter_geometry(cfg), n=so["grid"], pitch=so["pitch_m"], wavelength=so["wavelength_m"],
              waist=so["waist_m"], pad=so["pad"])
    return SorterChain(**kw), SorterChain(fanout=fanout, **kw)


def characterize_sorter(cfg, log=None):
    """Crosstalk with and without the fan-out; the strip is computed once per mode."""
    log = log or (lambda msg: None)
    so = cfg["sorter"]
    fanout = design_fanout(so["copies"], so["uniformity_tol"]) if so["fanout"] else None
    plain, fanned = sorter_chains(cfg, fanout)
    ells = range(-so["l_range"], so["l_range"] + 1)
    prof_plain, prof_fan = {}, {}
    for ell in ells:
        strip = plain.strip(ell)
        prof_plain[ell] = plain.sorted_profile(strip=strip)
        if fanout is not None:
            prof_fan[ell] = fanned.sorted_profile(strip=strip)
    results = {"without_fanout": crosstalk_from_profiles(prof_plain, so["window_fraction"])}
    if fanout is not None:
        results["with_fanout"] = crosstalk_from_profiles(prof_fan, so["window_fraction"])
    for name, ct in results.items():
        log(f"{name}: mean neighbour overlap {ct.mean_neighbor_overlap!r}")
    return results, fanout, plain


def _linearity(ct):
    """Max deviation of spot centroids from an affine fit, in units of spot pitch."""
    coef = np.polyfit(ct.ells, ct.centers, 1)
    return float(np.max(np.abs(np.polyval(coef, ct.ells) - ct.centers)) / abs(ct.pitch))


def run_sorter_characterization(cfg, out=None, masks=True):
    log = RunLog()
    log(f"config sha256 {cfg.digest()}")
    results, fanout, chain = characterize_sorter(cfg, log)
    geom = chain.geom
    summary = {"geometry": {"a_m": geom.a, "b_m": geom.b, "f_m": geom.f, "n_index": geom.n_index}}
    files = {}
    for name, ct in results.items():
        files[f"crosstalk_{name}.csv"] = ct.to_csv()
        summary[name] = {
            "mean_neighbor_overlap": ct.mean_neighbor_overlap,
            "diagonal_dominant": bool(np.all(np.argmax(ct.matrix, axis=1) == np.arange(ct.ells.size))),
            "linearity_residual": _linearity(ct),
            "spot_pitch": ct.pitch,
        }
    if fanout is not None:
        powers = np.abs(farfield_orders(fanout.phase_coeffs, fanout.copies)) ** 2
        summary["fanout"] = {"copies": fanout.copies, "phase_coeffs": list(fanout.phase_coeffs),
                             "efficiency": fanout.efficiency, "uniformity": fanout.uniformity,
                             "farfield_order_powers": powers.tolist(), "below_target": fanout.below_target}
        summary["reduction_ratio"] = (summary["with_fanout"]["mean_neighbor_overlap"]
                                      / summary["without_fanout"]["mean_neighbor_overlap"])
    files["sorter_summary.json"] = _dumps(summary)
    arrays = {}
    if masks:
        for name, (arr, meta) in element_masks(chain).items():
            arrays[f"masks/{name}.npy"] = arr
            files[f"masks/{name}.json"] = _dumps(meta)
    files["run.log"] = log.text()
    files["manifest.json"] = _dumps(_manifest(cfg, "sorter", files))
    if out is not None:
        for name, text in files.items():
            _write(out, name, text)
        for name, arr in arrays.items():
            path = Path(out) / name
            path.parent.mkdir(parents=True, exist_ok=True)
            np.save(path, arr)
    return files
