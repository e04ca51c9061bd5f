"""Command-line front end.

Exit codes: 0 ok, 2 validation failure, 3 unschedulable, 4 sampling
condition not certified, 5 budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import subprocess
import sys
from pathlib import Path

from . import __version__
from .distributions import DistributionError
from .fixtures import NAMES, load_fixture
from .mdp import StateSpaceExceeded, action_name, build_explicit, to_dot, to_state_table, to_transitions
from .sim import GENERATOR_ID
from .task_model import TaskSystem, validate

EXIT_OK, EXIT_INVALID, EXIT_UNSCHEDULABLE, EXIT_NOT_CERTIFIED, EXIT_BUDGET = 0, 2, 3, 4, 5


class CliError(Exception):
    def __init__(self, code: int, msg: str):
        super().__init__(msg)
        self.code = code


def _commit() -> str:
    try:
        out = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            cwd=Path(__file__).parent, capture_output=True, text=True, timeout=5,
        )
        return out.stdout.strip() or "unknown"
    except Exception:
        return "unknown"


def _header(seed: int) -> str:
    return f"# seed={seed} generator={GENERATOR_ID} version={__version__} commit={_commit()}"


def load_system(arg: str) -> TaskSystem:
    """A path to a task-system JSON file, or the name of a bundled fixture."""
    p = Path(arg)
    try:
        if p.exists():
            sys_ = TaskSystem.load(p)
        elif arg in NAMES:
            sys_ = load_fixture(arg)
        else:
            raise CliError(EXIT_INVALID, f"no such file or fixture: {arg}")
    except (DistributionError, KeyError, ValueError, json.JSONDecodeError) as e:
        if isinstance(e, CliError):
            raise
        raise CliError(EXIT_INVALID, f"cannot parse {arg}: {e}") from e
    problems = validate(sys_)
    if problems:
        raise CliError(EXIT_INVALID, "invalid task system:\n" + "\n".join(f"  {v}" for v in problems))
    return sys_


def _build(args, sys_):
    try:
        return build_explicit(sys_, max_vertices=args.max_vertices)
    except StateSpaceExceeded as e:
        raise CliError(EXIT_BUDGET, str(e)) from e


def _region(args, sys_):
    from .safety import Unschedulable, safe_region

    m = _build(args, sys_)
    try:
        return m, safe_region(m)
    except Unschedulable as e:
        raise CliError(EXIT_UNSCHEDULABLE, f"unschedulable: {e}") from e


def _write(path: str | None, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# -- subcommands ------------------------------------------------------------------


def cmd_validate(args) -> int:
    sys_ = load_system(args.system)
    print(f"ok: {len(sys_)} tasks ({len(sys_.hard)} hard, {len(sys_.soft)} soft)")
    return EXIT_OK


def cmd_build_mdp(args) -> int:
    sys_ = load_system(args.system)
    m = _build(args, sys_)
    sched = len(m.scheduler_ids())
    print(f"vertices {m.n}")
    print(f"scheduler {sched}")
    print(f"taskgen {m.n - sched}")
    print(f"edges {m.num_edges()}")
    print(f"bottom {'reachable' if m.bottom is not None else 'unreachable'}")
    if args.out:
        Path(args.out + ".tra").write_text(to_transitions(m))
        Path(args.out + ".sta").write_text(to_state_table(m))
    return EXIT_OK


def cmd_export(args) -> int:
    sys_ = load_system(args.system)
    m = _build(args, sys_)
    fmt = args.format or "csv"
    if fmt == "dot":
        try:
            text = to_dot(m)
        except StateSpaceExceeded as e:
            raise CliError(EXIT_BUDGET, f"too large for dot: {e}") from e
    elif fmt == "json":
        states = [{"id": v, "vertex": m.sem.vertex(v).render(), "scheduler": m.sem.is_scheduler(v)} for v in range(m.n)]
        edges = [{"src": s, "dst": d, "prob": str(p), "cost": str(c), "label": lab} for s, d, p, c, lab in m.edges()]
        text = json.dumps({"init": m.init, "states": states, "edges": edges}, indent=1) + "\n"
    else:
        text = "src,dst,prob,cost,label\n" + "".join(
            f'{s},{d},{p},{c},"{lab}"\n' for s, d, p, c, lab in m.edges()
        )
    _write(args.out, text)
    return EXIT_OK


def cmd_synth_safe(args) -> int:
    from .safety import mgs

    sys_ = load_system(args.system)
    m, region = _region(args, sys_)
    print(f"safe vertices {len(region.vertices)} of {m.n}")
    print(f"safe scheduler vertices {len(region.scheduler_vertices)}")
    strat = {str(v): [action_name(a) for a in acts] for v, acts in sorted(mgs(region).items())}
    if args.dump:
        for v in region.scheduler_vertices:
            print(f"  {v} {m.sem.vertex(v).render()} -> {{{', '.join(action_name(a) for a in region.safe[v])}}}")
    if args.out:
        Path(args.out).write_text(json.dumps(strat, indent=1) + "\n")
    else:
        print(json.dumps(strat))
    return EXIT_OK


def cmd_check_sampling(args) -> int:
    from .safety import good_for_efficient_sampling, good_for_sampling

    sys_ = load_system(args.system)
    _, region = _region(args, sys_)
    gfs = good_for_sampling(region)
    eff = good_for_efficient_sampling(region)
    print("task,good_for_sampling,|V_i|,good_for_efficient_sampling,|Safe_i|,K_edges,K_ticks")
    for i in sys_.soft:
        e = eff.per_task[i]
        print(f"{i},{str(gfs[i].ok).lower()},{len(gfs[i].witnesses)},{str(e.ok).lower()},{len(e.safe_set)},"
              f"{'' if e.k_edges is None else e.k_edges},{'' if e.k_ticks is None else e.k_ticks}")
    all_gfs = all(v.ok for v in gfs.values())
    print(f"overall good_for_sampling={str(all_gfs).lower()} good_for_efficient_sampling={str(eff.ok).lower()}"
          f" K={'' if eff.k_edges is None else eff.k_edges}")
    if args.require == "sampling" and not all_gfs:
        return EXIT_NOT_CERTIFIED
    if args.require == "efficient" and not eff.ok:
        return EXIT_NOT_CERTIFIED
    return EXIT_OK


def cmd_solve(args) -> int:
    from .mean_cost import NoConvergence, optimize_mean_cost, strategy_to_json

    sys_ = load_system(args.system)
    _, region = _region(args, sys_)
    try:
        rep = optimize_mean_cost(region, tol=args.tol)
    except NoConvergence as e:
        raise CliError(EXIT_BUDGET, str(e)) from e
    print(f"gain {rep.gain:.10g}")
    print(f"iterations {rep.iterations}")
    print(f"residual_span {rep.residual_span:.3g}")
    if args.strategy_out:
        Path(args.strategy_out).write_text(json.dumps(strategy_to_json(rep.strategy), indent=1) + "\n")
    return EXIT_OK


def cmd_learn(args) -> int:
    from .pac import ConditionNotCertified, LearnConfig, Mode, learn_iid, learn_safe, learn_soft_only
    from .safety import good_for_efficient_sampling, good_for_sampling
    from .sim import SimEnv

    sys_ = load_system(args.system)
    mode = args.mode
    if mode == "iid":
        cfg = LearnConfig(args.eps, args.gamma, args.seed)
        model = learn_iid(sys_, cfg)
    elif not sys_.hard:
        cfg = LearnConfig(args.eps, args.gamma, args.seed, Mode.SOFT_ONLY, args.budget)
        model = learn_soft_only(SimEnv(sys_, args.seed, log=False), cfg)
    else:
        m, region = _region(args, sys_)
        gfs = good_for_sampling(region)
        eff = good_for_efficient_sampling(region)
        if mode == "auto":
            if eff.ok:
                mode = "efficient"
            elif all(v.ok for v in gfs.values()):
                mode = "sampling"
            else:
                raise CliError(EXIT_NOT_CERTIFIED, "no sampling condition holds; use --mode hard-only")
        cfg = LearnConfig(args.eps, args.gamma, args.seed, Mode(mode), args.budget)
        env = SimEnv(sys_, args.seed, sem=m.sem, log=False)
        try:
            model = learn_safe(env, region, cfg, sampling=gfs, efficient=eff)
        except ConditionNotCertified as e:
            raise CliError(EXIT_NOT_CERTIFIED, str(e)) from e
    out = args.out or "learned.json"
    model.system.save(out)
    prov = model.provenance()
    prov.update({"seed": args.seed, "generator": GENERATOR_ID, "mode": mode, "eps": args.eps, "gamma": args.gamma})
    Path(out + ".provenance.json").write_text(json.dumps(prov, indent=1) + "\n")
    print(_header(args.seed))
    print(f"steps {model.steps}")
    print(f"complete {str(model.complete).lower()}")
    print(f"wrote {out}")
    return EXIT_OK if model.complete else EXIT_BUDGET


def cmd_bounds(args) -> int:
    from .pac import (
        eps_for_robustness,
        eta_beta_threshold,
        eta_from_eps_raw,
        perturbation_gap,
        phase_length_bound,
        soft_only_formula,
    )
    from .distributions import hoeffding_samples

    eps, gamma = args.eps, args.gamma
    pi_min, n_sched = args.pi_min, args.vertices
    hard = False
    if args.system:
        sys_ = load_system(args.system)
        n_soft, a_max, dd, n, pi_max = len(sys_.soft), sys_.a_max, sys_.domain_max, len(sys_), sys_.pi_max
        hard = bool(sys_.hard)
        _, region = _region(args, sys_)
        pi_min = pi_min if pi_min is not None else region.pi_min_edge()
        n_sched = n_sched if n_sched is not None else len(region.scheduler_vertices)
        print(f"pi_min {float(pi_min):.10g}")
        print(f"scheduler_vertices {n_sched}")
        print(f"phase_T {phase_length_bound(sys_, eps, gamma)}")
    else:
        n_soft, a_max, dd, n, pi_max = args.n_soft, args.a_max, args.domain, args.n_tasks, args.pi_max
        pi_min = pi_min if pi_min is not None else "0.4"
        n_sched = n_sched if n_sched is not None else 100
    print(f"hoeffding_samples {hoeffding_samples(dd, eps, gamma)}")
    if n_soft and not hard:
        print(f"steps_soft_only {soft_only_formula(n_soft, a_max, dd, eps, gamma)}")
    eta = eta_from_eps_raw(n, pi_max, eps)
    print(f"eta {float(eta):.10g}")
    thr = eta_beta_threshold(args.beta, pi_min, n_sched)
    print(f"eta_beta {float(thr):.10g}")
    print(f"eps_robust {float(eps_for_robustness(args.beta, pi_min, n_sched)):.10g}")
    try:
        print(f"gap {perturbation_gap(n_sched, thr, pi_min):.10g}")
    except ValueError as e:
        print(f"gap undefined ({e})")
    return EXIT_OK


def cmd_mcts(args) -> int:
    from .mcts import MctsParams, run_mcts_schedule
    from .sim import SimEnv

    sys_ = load_system(args.system)
    model = load_system(args.model) if args.model else None
    print(_header(args.seed))
    print("seed,mean_cost,violations")
    for k in range(args.seeds):
        seed = args.seed + k
        params = MctsParams(args.horizon, args.budget, args.rollouts, seed=seed)
        env = SimEnv(sys_, seed, poison=False, log=False)
        rep = run_mcts_schedule(env, args.advice, params, args.eval_steps, model=model)
        print(f"{seed},{rep.mean_cost:.6f},{rep.safety_violations}")
    return EXIT_OK


def cmd_qlearn(args) -> int:
    from .policies import QPolicy, QTable, default_penalty, edf_shield, evaluate_q, mgs_shield, no_shield, train_q
    from .sim import SimEnv, UniformStream

    sys_ = load_system(args.system)
    if args.shield == "mgs":
        m, region = _region(args, sys_)
        shield = mgs_shield(region)
    else:
        m = _build(args, sys_)
        shield = edf_shield(m.sem) if args.shield == "edf" else no_shield(m.sem)
    penalty = default_penalty(sys_) if args.shield == "none" else 0.0
    env = SimEnv(sys_, args.seed, sem=m.sem, poison=False, log=False)
    pol = QPolicy(QTable(discount=args.discount), shield, UniformStream(args.seed + 1), penalty=penalty)
    tr = train_q(env, pol, args.steps)
    ev = evaluate_q(env, pol, args.eval_steps)
    print(_header(args.seed))
    print(f"train_steps {args.steps}")
    print(f"train_hard_misses {tr.hard_misses}")
    print(f"eval_mean_cost {ev.mean_cost:.6f}")
    print(f"eval_hard_misses {ev.hard_misses}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .mean_cost import strategy_from_json
    from .policies import EdfPolicy, RandomSafePolicy, StrategyPolicy, mgs_shield, no_shield, run_with_policy
    from .sim import SimEnv

    sys_ = load_system(args.system)
    m = _build(args, sys_)
    env = SimEnv(sys_, args.seed, sem=m.sem, poison=False)
    pol_arg = args.policy
    if pol_arg == "edf":
        pol, shield = EdfPolicy(m.sem), no_shield(m.sem)
    elif pol_arg == "random-safe":
        from .safety import Unschedulable, safe_region

        try:
            region = safe_region(m)
        except Unschedulable as e:
            raise CliError(EXIT_UNSCHEDULABLE, str(e)) from e
        pol, shield = RandomSafePolicy(env.rng), mgs_shield(region)
    elif pol_arg.startswith("never:"):
        task = int(pol_arg.split(":", 1)[1])
        pol, shield = _NeverPolicy(task), no_shield(m.sem)
    elif pol_arg.startswith("strategy:"):
        sigma = strategy_from_json(json.loads(Path(pol_arg.split(":", 1)[1]).read_text()))
        pol, shield = StrategyPolicy(sigma, EdfPolicy(m.sem)), no_shield(m.sem)
    else:
        raise CliError(EXIT_INVALID, f"unknown policy {pol_arg!r}")
    st = run_with_policy(env, pol, shield, args.steps)
    print(_header(args.seed))
    print(f"ticks {env.ticks}")
    print(f"mean_cost {st.mean_cost:.6f}")
    print(f"hard_misses {st.hard_misses}")
    print(f"soft_misses {st.soft_misses}")
    if args.trace_out:
        Path(args.trace_out).write_text(env.trace())
    return EXIT_OK


class _NeverPolicy:
    def __init__(self, task: int):
        self.task = task

    def choose(self, vid, allowed):
        return [a for a in allowed if a != self.task][0]

    def observe(self, *a, **k):
        pass


def cmd_replay(args) -> int:
    from .sim import replay

    sys_ = load_system(args.system)
    rep = replay(sys_, Path(args.trace).read_text())
    print(f"steps {rep.steps}")
    if rep.regenerated is not None:
        print(f"regenerated {str(rep.regenerated).lower()}")
    if not rep.ok:
        print(f"mismatch: {rep.first_error}")
        return EXIT_INVALID
    print("ok")
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import ExperimentSpec, rows_to_csv, run_benchmark, summarize
    from .mcts import MctsParams

    spec = ExperimentSpec(
        fixtures=args.fixtures,
        methods=args.methods,
        seeds=list(range(args.seed, args.seed + args.seeds)),
        eval_steps=args.eval_steps,
        train_steps=args.train_steps,
        mcts=MctsParams(args.horizon, args.budget, args.rollouts),
        jobs=args.jobs,
    )
    rows = run_benchmark(spec)
    if args.out:
        Path(args.out).write_text(_header(args.seed) + "\n" + rows_to_csv(rows))
    print(_header(args.seed))
    sys.stdout.write(summarize(rows))
    return EXIT_OK


# -- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", type=float, default=1e-8)
    common.add_argument("--max-vertices", type=int, default=1_000_000)
    common.add_argument("--format", choices=["json", "csv", "dot"], default=None)

    p = argparse.ArgumentParser(prog="safesched", description="Safe scheduling of hard and soft tasks.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_, system=True):
        sp = sub.add_parser(name, parents=[common], help=help_)
        if system:
            sp.add_argument("system", help="task-system JSON file or bundled fixture name")
        sp.set_defaults(func=fn)
        return sp

    add("validate", cmd_validate, "check a task system")
    sp = add("build-mdp", cmd_build_mdp, "build the explicit game and print its size")
    sp.add_argument("--out", help="write <out>.tra and <out>.sta")
    sp = add("export", cmd_export, "export the explicit game (csv, json or dot)")
    sp.add_argument("--out")
    sp = add("synth-safe", cmd_synth_safe, "safe region and most general safe scheduler")
    sp.add_argument("--dump", action="store_true", help="list safe actions per vertex")
    sp.add_argument("--out", help="write the MGS map as JSON")
    sp = add("check-sampling", cmd_check_sampling, "decide the two sampling conditions")
    sp.add_argument("--require", choices=["sampling", "efficient"], help="exit 4 if this condition fails")
    sp = add("solve", cmd_solve, "optimal expected mean-cost on the safe region")
    sp.add_argument("--strategy-out")
    sp = add("learn", cmd_learn, "learn the distributions by executing the system")
    sp.add_argument("--eps", default="0.1")
    sp.add_argument("--gamma", default="0.1")
    sp.add_argument("--mode", choices=["auto", "sampling", "efficient", "hard-only", "iid"], default="auto")
    sp.add_argument("--budget", type=int, default=None, help="step budget")
    sp.add_argument("--out")
    sp = sub.add_parser("bounds", parents=[common], help="evaluate the sample, step and robustness bounds")
    sp.set_defaults(func=cmd_bounds)
    sp.add_argument("--system", default=None)
    sp.add_argument("--eps", default="0.1")
    sp.add_argument("--gamma", default="0.1")
    sp.add_argument("--n-soft", type=int, default=1)
    sp.add_argument("--n-tasks", type=int, default=2)
    sp.add_argument("--a-max", type=int, default=1)
    sp.add_argument("--domain", type=int, default=1)
    sp.add_argument("--pi-max", default="0.5")
    sp.add_argument("--beta", default="0.1")
    sp.add_argument("--pi-min", default=None, help="smallest edge probability (default: from --system, else 0.4)")
    sp.add_argument("--vertices", type=int, default=None, help="|V_sched| (default: from --system, else 100)")
    sp = add("mcts", cmd_mcts, "receding-horizon MCTS evaluation (CSV)")
    sp.add_argument("--advice", choices=["mgs", "edf", "none"], default="mgs")
    sp.add_argument("--horizon", type=int, default=30)
    sp.add_argument("--budget", type=int, default=500)
    sp.add_argument("--rollouts", type=int, default=100)
    sp.add_argument("--eval-steps", type=int, default=600)
    sp.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds starting at --seed")
    sp.add_argument("--model", help="plan on this (learned) system instead of the true one")
    sp = add("qlearn", cmd_qlearn, "tabular Q-learning with a shield")
    sp.add_argument("--shield", choices=["mgs", "edf", "none"], default="mgs")
    sp.add_argument("--steps", type=int, default=10_000)
    sp.add_argument("--eval-steps", type=int, default=600)
    sp.add_argument("--discount", type=float, default=0.99)
    sp = add("simulate", cmd_simulate, "run a fixed policy and optionally write a trace")
    sp.add_argument("--policy", default="edf", help="edf | random-safe | never:<task> | strategy:<file.json>")
    sp.add_argument("--steps", type=int, default=600)
    sp.add_argument("--trace-out")
    sp = add("replay", cmd_replay, "re-verify a trace against the model")
    sp.add_argument("trace")
    sp = sub.add_parser("bench", parents=[common], help="benchmark fixtures x methods x seeds")
    sp.set_defaults(func=cmd_bench)
    sp.add_argument("--fixtures", nargs="+", default=["simple", "1H2S", "2H1S"])
    from .bench import METHODS

    sp.add_argument("--methods", nargs="+", choices=METHODS, default=["solve", "mcts-mgs", "mcts-edf"])
    sp.add_argument("--seeds", type=int, default=3, help="number of consecutive seeds starting at --seed")
    sp.add_argument("--eval-steps", type=int, default=600)
    sp.add_argument("--train-steps", type=int, default=10_000)
    sp.add_argument("--horizon", type=int, default=10)
    sp.add_argument("--budget", type=int, default=30)
    sp.add_argument("--rollouts", type=int, default=3)
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--out")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
