"""Experiment driver: config files, subcommands and reproducible outputs.

Configs are INI files read by configparser, for example

    [experiment]
    kind = lyapunov-sweep
    eps_list = 1e-4 1e-6 1e-8
    n = 1000000
    seed = 7

    [family]
    label = hopping

    [family.t]
    kind = uniform
    lo = 0.7
    hi = 1.5

Command-line flags override file values; every run writes its data files
plus a manifest.json echoing the resolved configuration.  Reruns with the
same config, seed and worker count reproduce the data files byte for byte
(the manifest carries the wall time and is exempt).
"""

import argparse
import configparser
import csv
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, cocycle, comparison, dynamics, estimators, models

KINDS = ("lyapunov", "lyapunov-sweep", "measure", "passages", "comparison",
         "cocycle", "ising", "toy-chain")

_DIST_KEYS = {
    "uniform": ("lo", "hi"),
    "two_point": ("v1", "p1", "v2"),
    "constant": ("v",),
    "discrete": ("values", "weights"),
    "log_ratio_uniform": ("lo", "hi"),
}

_FAMILY_SLOTS = {
    "hopping": ("t",),
    "dirac": ("w",),
    "ising": ("h",),
    "generic": ("kappa", "a", "b", "c"),
}


class ConfigError(Exception):
    pass


@dataclass
class ExperimentConfig:
    kind: str
    family: dict
    eps: float = None
    eps_list: list = field(default_factory=list)
    n: int = 1_000_000
    seed: int = 0
    workers: int = 1
    out: str = None
    burn_in: int = dynamics.DEFAULT_BURN
    target_z: float = 0.0
    cap: float = cocycle.DEFAULT_CAP
    samples: int = 20_000
    passages: int = 2000
    variant: str = "faster"
    flavor: str = "asymptotic"
    coupling: float = 1.0
    n_levels: int = 200
    force: bool = False


def _parse_dist(section, where):
    kind = section.get("kind")
    if kind not in _DIST_KEYS:
        raise ConfigError("%s: kind must be one of %s, got %r"
                          % (where, "/".join(_DIST_KEYS), kind))
    params = {}
    for key in _DIST_KEYS[kind]:
        if key not in section:
            raise ConfigError("%s: missing key %r for kind %r"
                              % (where, key, kind))
        raw = section[key]
        try:
            if key in ("values", "weights"):
                params[key] = [float(v) for v in raw.replace(",", " ").split()]
            else:
                params[key] = float(raw)
        except ValueError:
            raise ConfigError("%s: %s: expected a number, got %r"
                              % (where, key, raw))
    try:
        return models.BoundedDistribution(kind, params)
    except ValueError as e:
        raise ConfigError("%s: %s" % (where, e))


def family_from_config(fc, force=False):
    label = fc.get("label")
    if label not in _FAMILY_SLOTS:
        raise ConfigError("[family] label must be one of %s, got %r"
                          % ("/".join(_FAMILY_SLOTS), label))
    dists = {}
    for slot in _FAMILY_SLOTS[label]:
        key = "dist_" + slot
        if key not in fc:
            raise ConfigError("[family.%s]: section missing" % (slot,))
        dists[slot] = fc[key]
    try:
        if label == "hopping":
            return models.hopping_family(dists["t"], allow_unbalanced=force)
        if label == "dirac":
            return models.dirac_family(dists["w"], allow_unbalanced=force)
        if label == "ising":
            return models.ising_family(dists["h"], allow_unbalanced=force)
        return models.generic_family(dists["kappa"], dists["a"], dists["b"],
                                     dists["c"], allow_unbalanced=force)
    except ValueError as e:
        raise ConfigError("[family]: %s" % (e,))


def load_config_file(path):
    cp = configparser.ConfigParser()
    p = Path(path)
    if not p.exists():
        raise ConfigError("%s: no such config file" % (path,))
    try:
        cp.read(p)
    except configparser.Error as e:
        raise ConfigError("%s: %s" % (path, e))
    return cp


def _get_typed(cp, section, key, cast, where):
    raw = cp.get(section, key)
    try:
        return cast(raw)
    except ValueError:
        raise ConfigError("%s: [%s] %s: bad value %r" % (where, section, key, raw))


def build_config(args):
    cfg = ExperimentConfig(kind=args.kind, family={})
    if args.config:
        cp = load_config_file(args.config)
        where = args.config
        exp = "experiment"
        if cp.has_section(exp):
            for key in cp[exp]:
                if key == "kind":
                    k = cp.get(exp, key)
                    if k != args.kind:
                        raise ConfigError(
                            "%s: [experiment] kind = %r does not match "
                            "subcommand %r" % (where, k, args.kind))
                elif key == "eps":
                    cfg.eps = _get_typed(cp, exp, key, float, where)
                elif key == "eps_list":
                    raw = cp.get(exp, key).replace(",", " ").split()
                    try:
                        cfg.eps_list = [float(v) for v in raw]
                    except ValueError:
                        raise ConfigError("%s: [experiment] eps_list: bad value"
                                          % (where,))
                elif key in ("n", "seed", "workers", "burn_in", "samples",
                             "passages", "n_levels"):
                    setattr(cfg, key, _get_typed(cp, exp, key, int, where))
                elif key in ("target_z", "cap", "coupling"):
                    setattr(cfg, key, _get_typed(cp, exp, key, float, where))
                elif key in ("variant", "flavor", "out"):
                    setattr(cfg, key, cp.get(exp, key))
                else:
                    raise ConfigError("%s: [experiment] unknown key %r"
                                      % (where, key))
        if cp.has_section("family"):
            fc = {"label": cp.get("family", "label", fallback=None)}
            for slot in _FAMILY_SLOTS.get(fc["label"], ()):
                sec = "family." + slot
                if cp.has_section(sec):
                    fc["dist_" + slot] = _parse_dist(cp[sec], "%s: [%s]" % (where, sec))
            cfg.family = fc
        elif args.kind not in ("toy-chain",):
            raise ConfigError("%s: [family] section missing" % (where,))

    for name in ("seed", "workers", "out", "eps", "n"):
        v = getattr(args, name, None)
        if v is not None:
            setattr(cfg, name, v)
    # for the toy chain the only size knob is the level count
    if args.kind == "toy-chain" and getattr(args, "n", None) is not None:
        cfg.n_levels = args.n
    if args.force:
        cfg.force = True
    if cfg.out is None:
        cfg.out = "runs/%s" % (args.kind,)
    return cfg


def _build_family(cfg):
    if not cfg.family:
        raise ConfigError("this experiment needs a [family] section")
    return family_from_config(cfg.family, force=cfg.force)


def _family_echo(cfg):
    out = {"label": cfg.family.get("label")}
    for key, val in cfg.family.items():
        if key.startswith("dist_"):
            out[key[5:]] = {"kind": val.kind, **val.params}
    return out


def _need_eps(cfg):
    if cfg.eps is None:
        raise ConfigError("this experiment needs eps (flag --eps or "
                          "[experiment] eps)")
    if not (0.0 < cfg.eps < 1.0):
        raise ConfigError("eps must lie in (0, 1), got %r" % (cfg.eps,))
    return cfg.eps


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for row in rows:
            wr.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_experiment(cfg):
    """Execute one experiment and write its outputs; returns the summary."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    files = []
    summary = {}

    if cfg.kind == "toy-chain":
        rows = []
        worst = 0.0
        for nn in range(2, cfg.n_levels + 1):
            res = comparison.toy_chain_residual(nn)
            worst = max(worst, res)
            rows.append((nn, res))
        _write_csv(out / "toy_chain.csv", ["levels", "residual"], rows)
        files.append("toy_chain.csv")
        summary = {"max_residual": worst, "levels_checked": cfg.n_levels - 1}

    elif cfg.kind == "lyapunov":
        fam = _build_family(cfg)
        eps = cfg.eps if cfg.eps is not None else 0.0
        if eps < 0 or eps >= 1:
            raise ConfigError("eps must lie in [0, 1)")
        est = estimators.lyapunov_birkhoff(fam, eps, cfg.n, cfg.seed,
                                           burn_in=cfg.burn_in,
                                           workers=cfg.workers)
        summary = {"eps": eps, "gamma_hat": est.value, "stderr": est.stderr,
                   "n": est.n_steps}
        if 0.0 < eps < 1.0:
            cns = models.constants(fam)
            if cns.type_class != "unbalanced":
                summary["asymptotic"] = estimators.lyapunov_asymptotic(fam, eps)
        _write_json(out / "lyapunov.json", summary)
        files.append("lyapunov.json")

    elif cfg.kind == "lyapunov-sweep":
        fam = _build_family(cfg)
        if len(cfg.eps_list) < 3:
            raise ConfigError("lyapunov-sweep needs eps_list with >= 3 values")
        rows = []
        points = []
        for eps in cfg.eps_list:
            est = estimators.lyapunov_birkhoff(fam, eps, cfg.n, cfg.seed,
                                               burn_in=cfg.burn_in,
                                               workers=cfg.workers)
            rows.append((eps, 1.0 / math.log(1.0 / eps), est.value, est.stderr))
            points.append((eps, est.value))
        slope, intercept, r2 = estimators.lyapunov_fit(points)
        _write_csv(out / "sweep.csv",
                   ["eps", "inv_log", "gamma_hat", "stderr"], rows)
        files.append("sweep.csv")
        summary = {"slope": slope, "intercept": intercept, "r2": r2,
                   "expected_slope": models.expected_log_kappa_sq(fam)}
        _write_json(out / "fit.json", summary)
        files.append("fit.json")

    elif cfg.kind == "measure":
        fam = _build_family(cfg)
        eps = _need_eps(cfg)
        st = dynamics.run_orbit(fam, eps, cfg.n, cfg.seed,
                                burn_in=cfg.burn_in, workers=cfg.workers,
                                target_z=cfg.target_z)
        emp = estimators.EmpiricalMeasure.from_orbit(st)
        rows = [(emp.edges[i], emp.edges[i + 1], emp.mass_plus[i],
                 emp.mass_minus[i]) for i in range(len(emp.mass_plus))]
        _write_csv(out / "measure.csv",
                   ["z_lo", "z_hi", "mass_plus", "mass_minus"], rows)
        files.append("measure.csv")
        cns = models.constants(fam)
        ref = "uniform" if cns.type_class == "confined" else "triangular"
        ks, l1 = estimators.measure_distance(emp, ref)
        summary = {"eps": eps, "reference": ref, "ks": ks, "l1": l1,
                   "overflow_mass": emp.overflow_mass(),
                   "inf_mass": emp.inf_mass,
                   "mass_plus": float(emp.mass_plus.sum()),
                   "mass_minus": float(emp.mass_minus.sum()),
                   "gamma_hat": st.gamma_hat,
                   "boundaries": st.n_boundaries}
        _write_json(out / "measure.json", summary)
        files.append("measure.json")

    elif cfg.kind == "passages":
        fam = _build_family(cfg)
        eps = _need_eps(cfg)
        st = dynamics.run_orbit(fam, eps, cfg.n, cfg.seed,
                                burn_in=cfg.burn_in, target_z=cfg.target_z)
        rows = []
        for log in st.passages:
            for k in range(len(log.n)):
                occ = log.s[k] if k < len(log.s) else ""
                rows.append((log.worker, k, int(log.n[k]), int(log.sign[k]),
                             float(log.z[k]), occ))
        _write_csv(out / "passages.csv",
                   ["worker", "k", "step", "sign", "z", "occupancy"], rows)
        files.append("passages.csv")
        rate = st.n_boundaries / st.n_steps
        summary = {"eps": eps, "boundaries": st.n_boundaries,
                   "rate_per_step": rate,
                   "rate_theory": st.delta ** 2
                   * models.expected_log_kappa_sq(fam)}
        cns = models.constants(fam)
        if cns.type_class == "rotating":
            summary["ids_per_site"] = 0.25 * rate
        _write_json(out / "passages.json", summary)
        files.append("passages.json")

    elif cfg.kind == "comparison":
        fam = _build_family(cfg)
        eps = _need_eps(cfg)
        if cfg.variant == "sandwich":
            rep = comparison.coupled_sandwich_run(fam, eps, cfg.n, cfg.seed,
                                                  target_z=cfg.target_z)
            summary = {"eps": eps, "n_steps": rep.n_steps,
                       "n_passages": rep.n_passages,
                       "violations": rep.violations,
                       "slower_violations": rep.slower_violations,
                       "faster_violations": rep.faster_violations,
                       "exit_violations": rep.exit_violations,
                       "confined": rep.confined}
        else:
            rs = comparison.renewal_estimates(cfg.variant, fam, eps,
                                              cfg.passages, cfg.seed,
                                              target_z=cfg.target_z,
                                              flavor=cfg.flavor)
            summary = {"eps": eps, "variant": cfg.variant,
                       "passages": cfg.passages,
                       "mean_t": rs.mean_t, "stderr_t": rs.stderr_t,
                       "mean_s": rs.mean_s, "stderr_s": rs.stderr_s,
                       "occupancy_product": rs.occupancy_product,
                       "occupancy_limit": rs.occupancy_limit,
                       "rate_product": rs.rate_product}
        _write_json(out / "comparison.json", summary)
        files.append("comparison.json")

    elif cfg.kind == "cocycle":
        fam = _build_family(cfg)
        eps = _need_eps(cfg)
        zgrid = np.linspace(-1.1, 1.1, 221)
        rows = cocycle.cocycle_grid(fam, eps, zgrid, cap=cfg.cap,
                                    samples=cfg.samples, seed=cfg.seed)
        _write_csv(out / "cocycle_grid.csv", ["z", "f", "F", "F_stderr"], rows)
        files.append("cocycle_grid.csv")
        rep = cocycle.lyapunov_via_measure(fam, eps, cfg.n, cfg.seed,
                                           cap=cfg.cap, samples=cfg.samples,
                                           burn_in=cfg.burn_in)
        summary = {"eps": eps, "cap": cfg.cap,
                   "gamma_birkhoff": rep.gamma_birkhoff,
                   "gamma_birkhoff_stderr": rep.gamma_birkhoff_stderr,
                   "gamma_f": rep.gamma_f, "gamma_f_stderr": rep.gamma_f_stderr,
                   "gamma_F": rep.gamma_F, "gamma_F_stderr": rep.gamma_F_stderr,
                   "plateau": cocycle.plateau_value(fam, eps, cfg.cap),
                   "region_mass": rep.region_mass,
                   "region_mean_F": rep.region_mean_F}
        _write_json(out / "cocycle.json", summary)
        files.append("cocycle.json")

    elif cfg.kind == "ising":
        if not cfg.family:
            raise ConfigError("ising needs a [family] section with label "
                              "ising")
        if cfg.family.get("label") != "ising":
            raise ConfigError("ising experiment needs family label ising")
        h_dist = cfg.family["dist_h"]
        fe, se = estimators.ising_free_energy(h_dist, cfg.coupling, cfg.n,
                                              cfg.seed, burn_in=cfg.burn_in)
        summary = {"coupling": cfg.coupling,
                   "eps": math.exp(-2.0 * cfg.coupling),
                   "free_energy": fe, "stderr": se, "n": cfg.n}
        _write_json(out / "ising.json", summary)
        files.append("ising.json")

    else:
        raise ConfigError("unknown experiment kind %r" % (cfg.kind,))

    manifest = {
        "kind": cfg.kind,
        "seed": cfg.seed,
        "workers": cfg.workers,
        "eps": cfg.eps,
        "eps_list": cfg.eps_list,
        "n": cfg.n,
        "burn_in": cfg.burn_in,
        "family": _family_echo(cfg) if cfg.family else None,
        "outputs": files,
        "package_version": __version__,
        "numpy_version": np.__version__,
        "wall_time_s": round(time.time() - t0, 3),
    }
    _write_json(out / "manifest.json", manifest)
    return summary


def validate_config(cfg):
    """Diagnostic pass: build the family, report constants and balance.

    Refuses an unbalanced family unless force is set; always reports why.
    """
    report = {"kind": cfg.kind, "ok": True, "notes": []}
    if cfg.kind not in KINDS:
        raise ConfigError("unknown kind %r" % (cfg.kind,))
    if cfg.kind == "toy-chain":
        return report
    try:
        fam = family_from_config(cfg.family, force=True)
    except ConfigError:
        raise
    lk, w = models.log_kappa_quadrature(fam)
    mean_lk = float(np.dot(w, lk))
    cns = models.constants(fam)
    report["family"] = fam.label
    report["constants"] = asdict(cns)
    report["mean_log_kappa"] = mean_lk
    report["e_log_kappa_sq"] = models.expected_log_kappa_sq(fam)
    if cns.type_class == "unbalanced":
        msg = ("unbalanced family: E[log kappa] != 0 "
               "(got %.6e)" % (mean_lk,))
        report["notes"].append(msg)
        if not cfg.force:
            report["ok"] = False
    if cfg.kind in ("measure", "passages", "comparison", "cocycle") \
            and cfg.eps is None:
        report["notes"].append("eps not set; the run command will refuse")
    return report


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="critprod",
        description="experiments on random 2x2 matrix products near a "
                    "balanced hyperbolic critical point")
    sub = parser.add_subparsers(dest="kind", required=True)
    names = list(KINDS) + ["validate"]
    for name in names:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="INI config file")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--workers", type=int, default=None)
        sp.add_argument("--out", default=None)
        sp.add_argument("--eps", type=float, default=None)
        sp.add_argument("--n", type=int, default=None)
        sp.add_argument("--force", action="store_true")
        if name == "validate":
            sp.add_argument("--kind", dest="target_kind", default="lyapunov",
                            choices=KINDS)
    args = parser.parse_args(argv)

    try:
        if args.kind == "validate":
            args2 = argparse.Namespace(**vars(args))
            args2.kind = args.target_kind
            cfg = build_config(args2)
            report = validate_config(cfg)
            print(json.dumps(report, indent=2, sort_keys=True))
            return 0 if report["ok"] else 1
        cfg = build_config(args)
        summary = run_experiment(cfg)
        print(json.dumps(summary, indent=2, sort_keys=True, default=str))
        return 0
    except ConfigError as e:
        print("config error: %s" % (e,), file=sys.stderr)
        return 2
    except ValueError as e:
        print("error: %s" % (e,), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
