"""Command-line driver: every experiment behind one entry point.

Subcommands: simulate, arch, table1, ame, pa, oracle, nuscan, bench.
A JSON config may be supplied with --config; explicit flags override it.
Exit codes: 0 success, 2 validation error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import subprocess
import sys
import time

import numpy as np

from . import __version__
from ._backend import backend_name
from .dynamics import (CLOCKS, REWIRE_MODES, TARGET_RULES, CounterConfig,
                       ModelParams, run, run_counter_construction, run_replicas,
                       spawn_rng)
from .stats import arch_points, fit_arch_xy, classify_run

SCHEMA_VERSION = 1


def _write_json(path, payload):
    payload = dict(payload)
    payload["schema_version"] = SCHEMA_VERSION
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _out_prefix(args, default):
    return args.out if args.out else default


def _model_params(args):
    return ModelParams(
        n=args.n, L=args.L, nu=args.nu, p=args.p,
        rewire_mode=args.rewire_mode, target_rule=args.target_rule,
        clock=args.clock, init=args.init, opinion_mode=args.opinion_mode,
        max_updates=int(args.max_updates), max_time=args.max_time,
        stride=int(args.stride), triples_stride=int(args.triples_stride),
        moments_stride=int(args.moments_stride),
        legacy_rates=args.legacy_rates)


def _add_model_flags(sp, n=1000, L=20.0, nu=1.0):
    sp.add_argument("--n", type=int, default=n)
    sp.add_argument("--L", type=float, default=L)
    sp.add_argument("--nu", type=float, default=nu)
    sp.add_argument("--p", type=float, default=0.5)
    sp.add_argument("--clock", choices=sorted(CLOCKS), default="discrete_efficient")
    sp.add_argument("--rewire-mode", choices=sorted(REWIRE_MODES), default="to_random")
    sp.add_argument("--target-rule", choices=sorted(TARGET_RULES),
                    default="exclude_neighbors")
    sp.add_argument("--init", choices=("regular", "er"), default="regular")
    sp.add_argument("--opinion-mode", choices=("product", "exact_count"),
                    default="product")
    sp.add_argument("--max-updates", type=float, default=1e7)
    sp.add_argument("--max-time", type=float, default=math.inf)
    sp.add_argument("--stride", type=float, default=0)
    sp.add_argument("--triples-stride", type=float, default=0)
    sp.add_argument("--moments-stride", type=float, default=0)
    sp.add_argument("--legacy-rates", action="store_true")


def _add_common(sp):
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--replicas", type=int, default=1)
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--out", type=str, default=None)


# ----------------------------------------------------------------- simulate

def cmd_simulate(args):
    params = _model_params(args)
    prefix = _out_prefix(args, "simulate")
    counter = CounterConfig() if args.counter else None
    rows = []
    for rep in range(args.replicas):
        rng = spawn_rng(args.seed, rep)
        if counter is not None:
            res = run_counter_construction(params, counter, rng=rng)
        else:
            res = run(params, rng=rng)
        suffix = "_r%d" % rep if args.replicas > 1 else ""
        res.trajectory.to_csv(prefix + suffix + ".csv")
        _write_json(prefix + suffix + ".json", res.to_dict())
        rows.append(res)
    if args.replicas > 1:
        summary = {
            "replicas": args.replicas,
            "absorbed": sum(1 for r in rows if r.absorbed),
            "mean_updates": float(np.mean([r.updates for r in rows])),
            "mean_final_density": float(np.mean([r.final_n1 / params.n
                                                 for r in rows])),
        }
        _write_json(prefix + "_summary.json", summary)
    print("wrote %s*.csv (%d replica%s, backend=%s)"
          % (prefix, args.replicas, "s" if args.replicas != 1 else "",
             backend_name()))
    return 0


# --------------------------------------------------------------------- arch

def _pooled_arch_fit(params, seed, replicas, burn_in):
    xs, ys = [], []
    for rep in range(replicas):
        res = run(params, rng=spawn_rng(seed, rep))
        x, y = arch_points(res.trajectory, burn_in=burn_in)
        xs.append(x)
        ys.append(y)
    return fit_arch_xy(np.concatenate(xs), np.concatenate(ys))


def cmd_arch(args):
    params = _model_params(args)
    fit = _pooled_arch_fit(params, args.seed, args.replicas, args.burn_in)
    payload = {
        "n": params.n, "L": params.L, "nu": params.nu, "p": params.p,
        "A": fit.A, "B": fit.B, "roots": list(fit.roots) if fit.roots else None,
        "n_points": fit.n_points, "rms_residual": fit.rms_residual,
        "replicas": args.replicas, "seed": args.seed,
    }
    path = _out_prefix(args, "arch") + ".json"
    _write_json(path, payload)
    print("A=%.5f B=%.5f roots=%s -> %s"
          % (fit.A, fit.B, fit.roots, path))
    return 0


# ------------------------------------------------------------------- table1

def cmd_table1(args):
    from .moments import (REFERENCE_SIM_MOMENTS, TABLE_NU, table_rows,
                          table_csv)

    nu_values = tuple(float(x) for x in args.nu_grid.split(",")) \
        if args.nu_grid else TABLE_NU
    if not args.resimulate:
        missing = [nu for nu in nu_values if nu not in REFERENCE_SIM_MOMENTS]
        if missing:
            raise ValueError(
                "no tabulated reference measurement at nu=%s; use --resimulate"
                % ",".join("%g" % v for v in missing))
    if not nu_values:
        rows = []
    elif args.resimulate:
        ub = {}
        for nu in nu_values:
            ub[nu] = _resimulated_moments(nu, args)
        rows = table_rows(nu_values, ub)
    else:
        rows = table_rows(nu_values)
    text = table_csv(rows)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return 0


def _resimulated_moments(nu, args):
    """Quasi-stationary (Ub, Uab, Ubb, Uaa) at n=1600, L=40 from fresh runs."""
    from .moments import moments_from_sums

    acc = np.zeros(4)
    count = 0
    for rep in range(args.replicas):
        params = ModelParams(n=args.n, L=args.L, nu=nu, p=0.5,
                             clock="discrete_efficient",
                             max_updates=int(args.max_updates),
                             moments_stride=args.n)
        res = run(params, rng=spawn_rng((args.seed, int(round(nu * 1000))), rep))
        ms = res.trajectory.moment_sums
        burn = int(len(ms) * args.burn_in)
        for row in ms[burn:]:
            frac = row[1] / args.n
            if not 0.45 <= frac <= 0.55:
                continue
            st = moments_from_sums(row, args.n, args.L, nu=nu,
                                   include_third=False)
            acc += (st.Ub, st.Uab, st.Ubb, st.Uaa)
            count += 1
    if count == 0:
        raise RuntimeError("no quasi-stationary samples at nu=%g" % nu)
    return tuple(acc / count)


# ----------------------------------------------------------------------- pa

def cmd_pa(args):
    from .pair_approx import pa_equilibrium, pa_integrate

    eq = pa_equilibrium(args.p, args.nu, args.L)
    payload = eq.as_dict()
    prefix = _out_prefix(args, "pa")
    _write_json(prefix + ".json", payload)
    if args.integrate:
        tr = pa_integrate(args.p, args.nu, args.L, t_end=args.t_end, dt=args.dt)
        with open(prefix + "_trajectory.csv", "w") as fh:
            fh.write("t,n10,n11,n00\n")
            for i in range(len(tr.t)):
                fh.write("%.6f,%.9g,%.9g,%.9g\n"
                         % (tr.t[i], tr.n10[i], tr.n11[i], tr.n00[i]))
    print(json.dumps(payload))
    return 0


# ---------------------------------------------------------------------- ame

def cmd_ame(args):
    from .ame import (AmeParams, backward_iterate, forward_simulate,
                      histogram_csv, path_csv, plane_system, stationary_estimate)

    params = AmeParams(nu=args.nu, p=args.p, bar_alpha=args.bar_alpha,
                       bar_beta=args.bar_beta, bar_delta=args.bar_delta,
                       bar_eps=args.bar_eps, bar_eta=args.bar_eta)
    prefix = _out_prefix(args, "ame")
    info = {"nu": args.nu, "p": args.p, "bar_alpha": args.bar_alpha,
            "bar_beta": args.bar_beta, "bar_delta": args.bar_delta,
            "bar_eps": args.bar_eps, "bar_eta": args.bar_eta}
    for plane in (0, 1):
        ps = plane_system(plane, params)
        info["fixed_point_plane%d" % plane] = list(ps.fixed_point())
        info["eigenvalues_plane%d" % plane] = list(ps.eigenvalues)
    if args.action in ("forward", "all"):
        fr = forward_simulate(params, T=args.T, seed=args.seed)
        path_csv(fr, prefix + "_path.csv")
        histogram_csv(fr.hist, fr.hist_edges[0], prefix + "_hist.csv")
        nu0, nu1 = fr.mean_sojourns()
        info["forward"] = {"occupancy_plane1": fr.occupancy_plane1,
                           "n_jumps": fr.n_jumps, "nu0": nu0, "nu1": nu1,
                           "clamp_events": fr.clamp_events}
    if args.action in ("stationary", "all"):
        for mode in ("time_average", "renewal_weighted"):
            budget = args.T if mode == "time_average" else args.renewal_samples
            est = stationary_estimate(params, mode=mode, budget=budget,
                                      seed=args.seed)
            histogram_csv(est.hist, est.hist_edges[0],
                          "%s_%s_hist.csv" % (prefix, mode))
            info[mode] = {"occupancy_plane1": est.occupancy_plane1,
                          "occupancy_se": est.occupancy_se,
                          "nu0": est.nu0, "nu1": est.nu1}
    if args.action in ("backward", "all"):
        z = np.array(plane_system(0, params).fixed_point())
        w = z + np.array([0.3, 0.3])
        back = backward_iterate(params, args.seed, args.cycles, z, w)
        info["backward"] = {"final_distance": float(back.distances[-1]),
                            "cycles": args.cycles,
                            "Y": list(back.final_z)}
    _write_json(prefix + ".json", info)
    print("wrote %s.json" % prefix)
    return 0


# ------------------------------------------------------------------- oracle

def cmd_oracle(args):
    from .oracle import make_fixtures, verify_fixtures

    if args.make_fixtures:
        names = make_fixtures(args.fixtures, count=args.count, seed=args.seed,
                              n_max=args.n_max, mode=args.mode)
        print("wrote %d fixtures under %s" % (len(names), args.fixtures))
        return 0
    n_checked, failures = verify_fixtures(args.fixtures)
    for msg in failures:
        print("FAIL %s" % msg, file=sys.stderr)
    print("%d fixtures checked, %d failures" % (n_checked, len(failures)))
    if n_checked == 0:
        print("no fixtures found", file=sys.stderr)
        return 2
    return 0 if not failures else 3


# ------------------------------------------------------------------- nuscan

def cmd_nuscan(args):
    lo, hi, step = (float(x) for x in args.nu_grid.split(":"))
    nus = np.arange(lo, hi + 1e-9, step)
    params0 = _model_params(args)
    lines = ["nu,replica,status,updates,tau_reached,final_minority,classification"]
    counts = {}
    for nu in nus:
        params = dataclasses.replace(params0, nu=float(nu))
        results = run_replicas(params, seed=args.seed, n_replicas=args.replicas,
                               jobs=args.jobs)
        for rep, res in enumerate(results):
            cls = classify_run(res, c_rapid=args.c_rapid,
                               c_prolonged=args.c_prolonged)
            lines.append("%.6g,%d,%s,%d,%d,%.6f,%s"
                         % (nu, rep, res.status, res.updates,
                            int(res.absorbed), res.final_minority_fraction, cls))
            counts.setdefault(float(nu), []).append(cls)
    text = "\n".join(lines) + "\n"
    path = _out_prefix(args, "nuscan") + ".csv"
    with open(path, "w") as fh:
        fh.write(text)
    for nu in sorted(counts):
        cs = counts[nu]
        print("nu=%.4g rapid=%d prolonged=%d indeterminate=%d"
              % (nu, cs.count("rapid"), cs.count("prolonged"),
                 cs.count("indeterminate")))
    print("wrote %s" % path)
    return 0


# -------------------------------------------------------------------- bench

def cmd_bench(args):
    from . import USING_JIT

    params = _model_params(args)
    t0 = time.time()
    res = run(params, seed=args.seed)
    warm = time.time() - t0
    t0 = time.time()
    res = run(params, seed=args.seed)
    hot = time.time() - t0
    rate = res.updates / hot if hot > 0 else float("inf")
    line = ("backend=%s jit=%s updates=%d warm=%.2fs hot=%.2fs rate=%.3g/s"
            % (backend_name(), USING_JIT, res.updates, warm, hot, rate))
    print(line)
    digest = (res.updates, res.final_n1, res.final_n10, res.final_dmax)
    print("checksum", digest)
    if args.compare:
        env = dict(os.environ)
        env["EVOVOTER_JIT"] = "0" if USING_JIT else "1"
        cmd = [sys.executable, "-m", "evovoter", "bench",
               "--n", str(args.n), "--L", str(args.L), "--nu", str(args.nu),
               "--p", str(args.p), "--max-updates", str(args.max_updates),
               "--seed", str(args.seed), "--clock", args.clock]
        out = subprocess.run(cmd, env=env, capture_output=True, text=True)
        sys.stdout.write(out.stdout)
        if out.returncode != 0:
            sys.stderr.write(out.stderr)
            return 3
        other = [l for l in out.stdout.splitlines() if l.startswith("checksum")]
        same = other and other[0] == "checksum " + str(digest)
        print("cross-backend checksum match:", bool(same))
        if not same:
            return 3
    return 0


# ------------------------------------------------------------------ plumbing

def build_parser():
    ap = argparse.ArgumentParser(prog="evovoter",
                                 description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("--config", type=str, default=None,
                    help="JSON file of flag defaults; explicit flags override")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="run the evolving voter model")
    _add_model_flags(sp)
    _add_common(sp)
    sp.add_argument("--counter", action="store_true",
                    help="use the counter-based construction")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("arch", help="fit the quadratic arch to a run")
    _add_model_flags(sp, n=2500, L=50.0, nu=2.5)
    _add_common(sp)
    sp.add_argument("--burn-in", type=float, default=0.1)
    sp.set_defaults(func=cmd_arch, clock="ctmc", max_updates=2e8)

    sp = sub.add_parser("table1", help="second-order moment prediction table")
    _add_common(sp)
    sp.add_argument("--use-reference-ub", action="store_true", default=True,
                    help="use the tabulated reference measurements (default)")
    sp.add_argument("--resimulate", action="store_true",
                    help="estimate Ub and the sim columns from fresh runs")
    sp.add_argument("--nu-grid", type=str, default=None,
                    help="comma list of nu values; empty string for none")
    sp.add_argument("--n", type=int, default=1600)
    sp.add_argument("--L", type=float, default=40.0)
    sp.add_argument("--max-updates", type=float, default=6e6)
    sp.add_argument("--burn-in", type=float, default=0.3)
    sp.set_defaults(func=cmd_table1)

    sp = sub.add_parser("pa", help="pair-approximation equilibrium and ODE")
    _add_common(sp)
    sp.add_argument("--p", type=float, default=0.5)
    sp.add_argument("--nu", type=float, default=1.0)
    sp.add_argument("--L", type=float, default=40.0)
    sp.add_argument("--integrate", action="store_true")
    sp.add_argument("--t-end", type=float, default=100.0)
    sp.add_argument("--dt", type=float, default=0.01)
    sp.set_defaults(func=cmd_pa)

    sp = sub.add_parser("ame", help="two-plane master-equation limit")
    _add_common(sp)
    sp.add_argument("--nu", type=float, default=2.0)
    sp.add_argument("--p", type=float, default=0.5)
    sp.add_argument("--bar-alpha", type=float, default=0.3625)
    sp.add_argument("--bar-beta", type=float, default=0.3074)
    sp.add_argument("--bar-delta", type=float, default=0.3625)
    sp.add_argument("--bar-eps", type=float, default=0.3074)
    sp.add_argument("--bar-eta", type=float, default=0.0833)
    sp.add_argument("--action", choices=("forward", "stationary", "backward",
                                         "all"), default="forward")
    sp.add_argument("--T", type=float, default=1000.0)
    sp.add_argument("--cycles", type=int, default=50)
    sp.add_argument("--renewal-samples", type=int, default=300)
    sp.set_defaults(func=cmd_ame)

    sp = sub.add_parser("oracle", help="exact drift enumeration fixtures")
    _add_common(sp)
    sp.add_argument("--fixtures", type=str, required=True)
    sp.add_argument("--make-fixtures", action="store_true")
    sp.add_argument("--count", type=int, default=50)
    sp.add_argument("--n-max", type=int, default=40)
    sp.add_argument("--mode", choices=("idealized_target", "exclude_neighbors"),
                    default="idealized_target")
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("nuscan", help="classification sweep over nu")
    _add_model_flags(sp, n=800, L=30.0)
    _add_common(sp)
    sp.add_argument("--nu-grid", type=str, default="0.4:2.6:0.2",
                    help="lo:hi:step")
    sp.add_argument("--c-rapid", type=float, default=10.0)
    sp.add_argument("--c-prolonged", type=float, default=200.0)
    sp.set_defaults(func=cmd_nuscan)

    sp = sub.add_parser("bench", help="throughput of the update kernel")
    _add_model_flags(sp, n=2000, L=20.0, nu=1.5)
    _add_common(sp)
    sp.add_argument("--compare", action="store_true",
                    help="rerun in a subprocess with the other backend")
    sp.set_defaults(func=cmd_bench, max_updates=2e6)
    ap.sub_map = sub.choices
    return ap


def main(argv=None):
    ap = build_parser()
    args, _ = ap.parse_known_args(argv)
    if args.config:
        try:
            with open(args.config) as fh:
                defaults = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            print("error: %s" % exc, file=sys.stderr)
            return 2
        known = {a.dest for a in ap._actions}
        for sp in ap.sub_map.values():
            known |= {a.dest for a in sp._actions}
        bad = set(defaults) - known
        if bad:
            print("unknown config keys: %s" % ", ".join(sorted(bad)),
                  file=sys.stderr)
            return 2
        for sp in ap.sub_map.values():
            dests = {a.dest for a in sp._actions}
            sp.set_defaults(**{k: v for k, v in defaults.items()
                               if k in dests})
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001  runtime failures exit 3
        print("runtime error: %s" % exc, file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
