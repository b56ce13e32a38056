"""Command-line experiment runner.

Usage: ``ruelle-shift <subcommand> <config.json> [flags]``.  Reports are JSON
written atomically to the output directory (``--out``, else the
``RUELLE_SHIFT_OUT`` environment variable, else ``outputs.dir`` of the config).
Exit status: 0 on success, 2 when a contraction premise fails, 1 on any other error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, load_config, with_overrides
from .contraction import global_contraction_experiment, local_contraction_experiment, metric_scale
from .errors import BudgetExceeded, ConfigInvalid, PremiseViolated, RuelleShiftError
from .gibbs import gibbs_oracle_sample, iterate_to_gibbs
from .io import read_jsonl, write_grid, write_json, write_jsonl
from .potential import normalize
from .space import MetricSpec
from .transfer import GridSpec, eigenpair
from .wasserstein import EXACT_THRESHOLD, EmpiricalMeasure, kantorovich_lb, w1

OUT_ENV = "RUELLE_SHIFT_OUT"
SUBCOMMANDS = ("classify", "eigen", "normalize", "gibbs", "wasserstein", "contract", "tails", "oracle-compare")


class Context:
    """Everything a subcommand needs: validated config, built objects and run flags."""

    def __init__(self, cfg: ExperimentConfig, args):
        self.cfg = cfg
        self.args = args
        try:
            self.space = cfg.build_space()
            self.w = cfg.build_weights()
            self.m = cfg.build_apriori()
            self.A = cfg.build_potential(self.m)
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigInvalid(f"invalid config: {exc}", [{"path": "<build>", "message": str(exc)}]) from None
        self.threads = args.threads or os.cpu_count() or 1
        self.out = Path(args.out or os.environ.get(OUT_ENV) or cfg.outputs.dir)

    @property
    def seed(self) -> int | None:
        return self.cfg.gibbs.seed

    def need_seed(self) -> int:
        if self.seed is None:
            raise ConfigInvalid("gibbs.seed: a seed is required for stochastic subcommands",
                                [{"path": "gibbs.seed", "message": "required for stochastic subcommands"}])
        return self.seed

    def grid_spec(self) -> GridSpec:
        s = self.cfg.solver
        return GridSpec(s.grid, s.clamp_mass, s.rank)

    def eigen(self):
        s = self.cfg.solver
        return eigenpair(self.A, self.m, self.w, self.grid_spec(), tuple(s.s_schedule), s.tol)

    def normalized(self):
        """The potential used by the dual operator, normalized through the eigenpair when requested."""
        if self.cfg.potential.normalize == "eigen":
            ep = self.eigen()
            return normalize(self.A, ep.psi, ep.lam, self.w, self.m)
        return self.A

    def scale(self, lip: float) -> dict:
        """Resolve the metric scale; ``auto`` uses ``max{8 c_contr/3, 1}``."""
        mc = self.cfg.metric
        try:
            auto = metric_scale(lip, self.w, mc.alpha)
        except PremiseViolated as exc:
            auto = {"a": None, "reason": str(exc)}
        a = auto["a"] if mc.a == "auto" else float(mc.a)
        return {"a": a, "alpha": mc.alpha, "mode": "auto" if mc.a == "auto" else "fixed", "auto": auto}

    def metric(self, lip: float) -> tuple[MetricSpec, dict]:
        info = self.scale(lip)
        if info["a"] is None:
            raise PremiseViolated("summable_d", info["auto"]["reason"])
        return MetricSpec.bounded(info["a"], info["alpha"]), info

    def p(self):
        return "c0" if self.space.is_c0 else self.space.p


def _envelope(ctx: Context, sub: str, result: dict, metric: dict | None, t0: float) -> dict:
    rep = {"subcommand": sub, "config_name": ctx.cfg.name, "config_hash": ctx.cfg.hash(), "seed": ctx.seed,
           "version": f"v{__version__}", "metric": metric if metric is not None else ctx.scale(ctx.A.lip),
           "result": result}
    if not ctx.args.reproducible:
        rep["created"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
        rep["elapsed_s"] = time.perf_counter() - t0
        rep["threads"] = ctx.threads
    return rep


# -- subcommands ----------------------------------------------------------------------


def cmd_classify(ctx: Context):
    from .weights import classify, log_d_values, rgh_indicators, spectral_radius, summability

    alpha = ctx.cfg.metric.alpha
    log_d, exact = log_d_values(ctx.w, 20)
    summ = summability(ctx.w, alpha)
    rgh = rgh_indicators(ctx.w)
    return {
        "flags": classify(ctx.w, ctx.p()).as_dict(),
        "d_values": np.exp(log_d).tolist(),
        "d_exact": exact,
        "summability": {"alpha": alpha, "partial_sum": summ.partial_sum, "tail_bound": summ.tail_bound,
                        "total": summ.total, "root_limit": summ.root_limit, "verdict": summ.verdict},
        "rgh": rgh,
        "spectral_radius": spectral_radius(ctx.w),
    }, None


def cmd_eigen(ctx: Context):
    ep = ctx.eigen()
    res = ep.as_dict()
    if "bin" in ctx.cfg.outputs.formats:
        write_grid(ctx.out / "psi.bin", ep.psi, {"quantity": "psi", "lambda": ep.lam})
        res["grid_dump"] = "psi.bin"
    return res, None


def cmd_normalize(ctx: Context):
    ep = ctx.eigen()
    B = normalize(ctx.A, ep.psi, ep.lam, ctx.w, ctx.m)
    res = {"lambda": ep.lam, "kappa": ep.kappa, "eigen_residual": ep.residual, "normalization_residual": B.residual,
           "sup_bound": B.sup_bound, "inf_bound": B.inf_bound, "lip": B.lip, "provenance": B.provenance,
           "rank": B.rank}
    if "bin" in ctx.cfg.outputs.formats:
        write_grid(ctx.out / "log_psi.bin", ep.log_psi, {"quantity": "log_psi", "lambda": ep.lam})
        res["grid_dump"] = "log_psi.bin"
    return res, ctx.scale(B.lip)


def cmd_gibbs(ctx: Context):
    seed = ctx.need_seed()
    g = ctx.cfg.gibbs
    B = ctx.normalized()
    metric, info = ctx.metric(B.lip)
    nu0 = EmpiricalMeasure.dirac(np.asarray(g.start), g.particles, ctx.space, seed=seed, stream=0)
    nu1 = None
    if g.start_prime is not None:
        nu1 = EmpiricalMeasure.dirac(np.asarray(g.start_prime), g.particles, ctx.space, seed=seed, stream=0)
    rep = iterate_to_gibbs(B, ctx.m, ctx.w, nu0, g.iters, g.candidates, seed, ctx.threads, metric, nu1,
                           g.record_every, g.max_depth)
    res = rep.as_dict()
    if B.rank == 1 and rep.final is not None:
        n = min(EXACT_THRESHOLD, g.particles)
        a = gibbs_oracle_sample(B, ctx.m, ctx.w, n, rep.final.depth, seed, 99, ctx.space)
        b = gibbs_oracle_sample(B, ctx.m, ctx.w, n, rep.final.depth, seed, 100, ctx.space)
        res["noise_floor"] = w1(a, b, metric, method="exact").value
        res["oracle_distance"] = w1(rep.final.head(n), a, metric, method="exact").value
    if "jsonl" in ctx.cfg.outputs.formats and rep.final is not None:
        write_jsonl(ctx.out / "particles.jsonl", rep.final.particles)
        res["particles_file"] = "particles.jsonl"
        if rep.final_prime is not None:
            write_jsonl(ctx.out / "particles_prime.jsonl", rep.final_prime.particles)
            res["particles_prime_file"] = "particles_prime.jsonl"
    return res, info


def cmd_wasserstein(ctx: Context):
    if not (ctx.args.mu and ctx.args.nu):
        raise ConfigInvalid("wasserstein needs --mu and --nu particle files",
                            [{"path": "--mu/--nu", "message": "missing"}])
    metric, info = ctx.metric(ctx.normalized().lip)
    mu = EmpiricalMeasure(read_jsonl(ctx.args.mu), ctx.space)
    nu = EmpiricalMeasure(read_jsonl(ctx.args.nu), ctx.space)
    n = min(len(mu), len(nu), EXACT_THRESHOLD)
    # particles are exchangeable, so equal-size heads are fair subsamples for the exact solver
    r = w1(mu.head(n), nu.head(n), metric, method="exact")
    res = {"w1": r.value, "method": r.plan.method, "compared": n, "subsampled": n < max(len(mu), len(nu)),
           "particles": [len(mu), len(nu)]}
    if res["subsampled"]:
        try:
            e = w1(mu, nu, metric, method="entropic")
            res["entropic"] = {"w1": e.value, "reg": e.plan.reg, "marginal_error": e.plan.marginal_error,
                               "dual_value": e.plan.dual_value}
        except BudgetExceeded as exc:
            res["entropic"] = {"skipped": str(exc)}
    a, alpha = info["a"], info["alpha"]
    tests = [lambda X, k=k: np.minimum(1.0, a * np.abs(X[:, k]) ** alpha) for k in range(min(3, mu.depth, nu.depth))]
    res["kantorovich_lb"] = kantorovich_lb(mu, nu, metric, tests, ctx.space)
    return res, info


def cmd_contract(ctx: Context):
    seed = ctx.need_seed()
    cc = ctx.cfg.contract
    B = ctx.normalized()
    info = ctx.scale(B.lip)
    a = info["a"]
    alpha = info["alpha"]
    kw = dict(particles=cc.particles, seed=seed, alpha=alpha, space=ctx.space, K=ctx.cfg.gibbs.candidates,
              a=None if ctx.cfg.metric.a == "auto" else a, threads=ctx.threads, max_depth=ctx.cfg.gibbs.max_depth)
    res = {}
    if ctx.args.mode == "local":
        if cc.local is None:
            raise ConfigInvalid("contract.local: missing pair", [{"path": "contract.local", "message": "required"}])
        reps = local_contraction_experiment(B, ctx.m, ctx.w, cc.local.x, cc.local.y, cc.n_grid, **kw)
        res["reports"] = [r.as_dict() for r in reps]
    else:
        if not cc.triples:
            raise ConfigInvalid("contract.triples: empty", [{"path": "contract.triples", "message": "required"}])
        res["reports"] = [global_contraction_experiment(B, ctx.m, ctx.w, t.x, t.y, t.n, **kw).as_dict()
                          for t in cc.triples]
    res["mode"] = ctx.args.mode
    res["passes"] = all(r["passes"] for r in res["reports"])
    return res, info


def cmd_tails(ctx: Context):
    from .apriori import GrowthLaw, adapted_tails_check, fast_tail_criteria

    tc = ctx.cfg.tails
    rep = adapted_tails_check(ctx.m, ctx.w, ctx.space, tc.epsilon, tc.horizon)
    growth = GrowthLaw(tc.growth["kind"], tc.growth.get("rate", 0.0)) if tc.growth else GrowthLaw.from_weights(ctx.w)
    fast = fast_tail_criteria(ctx.m, growth, ctx.space)
    decl = ctx.m.declared_tail
    return {"construction": {"epsilon": rep.epsilon, "tail_sum": rep.tail_sum, "tail_ok": rep.tail_condition,
                             "kappa_in_space": rep.kappa_in_X, "verdict": rep.verdict, "kappa_head": rep.kappa[:10]},
            "fast_path": {"growth": {"kind": growth.kind, "rate": growth.rate}, "verdict": fast},
            "tail_class": {"kind": decl.kind, "gamma": decl.gamma}}, None


def cmd_oracle_compare(ctx: Context):
    from .oracle import build, exact_eigen

    if ctx.m.kind != "atoms" or ctx.w.kind != "constant":
        raise ConfigInvalid("oracle-compare needs atomic a-priori measure and constant weights",
                            [{"path": "apriori.kind / weights.kind", "message": "atoms and constant required"}])
    inst = build(ctx.w.value(1), list(zip(ctx.m.values, ctx.m.probs)), ctx.A)
    ex = exact_eigen(inst)
    ep = ctx.eigen()
    o = inst.origin_state()
    if inst.state_rank and ep.psi.rank:
        psi_t = ep.psi(inst.collocation[:, : ep.psi.rank])
        psi_t = psi_t / psi_t[o]
    else:
        psi_t = np.ones(inst.size)
    rel = np.abs(psi_t - ex.psi) / np.abs(ex.psi)
    return {"states": inst.size, "lambda_oracle": ex.lam, "lambda_bracket": list(ex.bracket),
            "lambda_transfer": ep.lam, "lambda_gap": abs(ep.lam - ex.lam),
            "psi_max_rel_gap": float(rel.max()), "agree": abs(ep.lam - ex.lam) <= 1e-8 and float(rel.max()) <= 1e-6,
            "transfer": ep.as_dict()}, None


COMMANDS = {"classify": cmd_classify, "eigen": cmd_eigen, "normalize": cmd_normalize, "gibbs": cmd_gibbs,
            "wasserstein": cmd_wasserstein, "contract": cmd_contract, "tails": cmd_tails,
            "oracle-compare": cmd_oracle_compare}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ruelle-shift", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"ruelle-shift v{__version__}")
    sub = p.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("config", help="experiment config (JSON)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--particles", type=int)
        sp.add_argument("--iters", type=int)
        sp.add_argument("--candidates", type=int)
        sp.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
        sp.add_argument("--out", help=f"output directory (overrides ${OUT_ENV} and outputs.dir)")
        sp.add_argument("--reproducible", action="store_true", help="omit timestamps and timings from reports")
        if name == "contract":
            g = sp.add_mutually_exclusive_group()
            g.add_argument("--local", dest="mode", action="store_const", const="local")
            g.add_argument("--global", dest="mode", action="store_const", const="global")
            sp.set_defaults(mode="local")
        if name == "wasserstein":
            sp.add_argument("--mu", help="JSONL particle file")
            sp.add_argument("--nu", help="JSONL particle file")
    return p


def report_name(args) -> str:
    if args.subcommand == "contract":
        return f"contract_{args.mode}.json"
    return args.subcommand.replace("-", "_") + ".json"


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        cfg = with_overrides(load_config(args.config), seed=args.seed, particles=args.particles, iters=args.iters,
                             candidates=args.candidates)
        if args.threads is not None and args.threads < 1:
            raise ConfigInvalid("--threads must be positive", [{"path": "--threads", "message": "must be >= 1"}])
        ctx = Context(cfg, args)
        result, metric = COMMANDS[args.subcommand](ctx)
        report = _envelope(ctx, args.subcommand, result, metric, t0)
        path = write_json(ctx.out / report_name(args), report)
    except PremiseViolated as exc:
        print(f"premise violated ({exc.premise}): {exc}", file=sys.stderr)
        return 2
    except ConfigInvalid as exc:
        print(str(exc), file=sys.stderr)
        for e in exc.errors:
            print(f"  {e['path']}: {e['message']}", file=sys.stderr)
        return 1
    except (RuelleShiftError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(path)
    return 0


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
