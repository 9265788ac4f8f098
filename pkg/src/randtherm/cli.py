"""Command-line runner: ``randtherm {check,equilibrium,pressure,gibbs,decay,stability,all}``.

Exit codes: 0 success, 1 internal error, 2 hypothesis failure, 3 config error.
Every run writes into ``<out>/<config hash>-<seed>/`` and keeps a
``manifest.json`` there listing stages and emitted files.
"""
from __future__ import annotations

import argparse
import logging
import sys
import traceback
from dataclasses import dataclass, field
from pathlib import Path


from . import __version__, kernels
from .base import philox_generator
from .config import ConfigError, ExperimentConfig, load_config
from .fibers import FiberFamily, build_expansion_profile, potential_from_spec
from .hypotheses import HypothesisReport, check_conditions
from .io import RunManifest, write_csv, write_json
from .thermo import (
    decay_correlations,
    estimate_pressure,
    gibbs_check,
    rokhlin_entropy,
    stability_sweep,
)
from .transfer import (
    EquilibriumData,
    TransferContext,
    compute_equilibrium,
    contraction_samples,
    decay_bound_constants,
    sample_cone_pairs,
)

__all__ = ["main", "Runner", "EXIT_OK", "EXIT_INTERNAL", "EXIT_HYPOTHESES", "EXIT_CONFIG"]

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_HYPOTHESES = 2
EXIT_CONFIG = 3

STAGES = ("check", "equilibrium", "pressure", "gibbs", "decay", "stability")
_GATED = {"equilibrium", "pressure", "gibbs", "decay", "stability"}

log = logging.getLogger("randtherm")


class HypothesisGate(RuntimeError):
    """A gated stage was requested on a configuration failing its hypotheses."""


@dataclass
class Runner:
    """Executes pipeline stages for one configuration, caching shared results."""

    cfg: ExperimentConfig
    out: Path
    threads: int = 1
    override: bool = False
    command: str = "all"
    run_dir: Path = field(init=False)
    manifest: RunManifest = field(init=False)
    _report: HypothesisReport | None = field(default=None, init=False)
    _ctx: TransferContext | None = field(default=None, init=False)
    _eq: EquilibriumData | None = field(default=None, init=False)

    def __post_init__(self) -> None:
        self.run_dir = Path(self.out) / f"{self.cfg.hash()}-{self.cfg.seed}"
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self.manifest = RunManifest(
            self.run_dir / "manifest.json", self.cfg.to_dict(), __version__, self.command,
            override_hypotheses=self.override,
        )

    # ---- helpers -----------------------------------------------------------

    def _emit_json(self, name: str, obj) -> None:
        self.manifest.add_file(write_json(self.run_dir / name, obj))

    def _emit_csv(self, name: str, header, rows) -> None:
        self.manifest.add_file(write_csv(self.run_dir / name, header, rows))

    @property
    def ctx(self) -> TransferContext:
        if self._ctx is None:
            nm = self.cfg.numerics
            self._ctx = TransferContext(self.cfg.family_object(), self.cfg.orbit(), nm.grid_n,
                                        nm.preimage_tol)
        return self._ctx

    def report(self) -> HypothesisReport:
        if self._report is None:
            nm = self.cfg.numerics
            fam = self.ctx.family
            self._report = check_conditions(
                fam, self.cfg.profiles(fam), self.cfg.cone_params(), c=nm.c, rho=nm.rho,
                grid_n=nm.grid_n, ctx=self.ctx, cone_samples=nm.cone_samples,
            )
            self.manifest.hypotheses = dict(self._report.passes)
            self.manifest.write()
        return self._report

    def _gate(self, stage: str) -> None:
        rep = self.report()
        if rep.all_pass:
            return
        if self.override:
            log.warning("hypotheses %s fail; continuing with %s under override", rep.failed, stage)
            return
        raise HypothesisGate(f"hypotheses {rep.failed} fail; refusing to run {stage}")

    def equilibrium(self) -> EquilibriumData:
        if self._eq is None:
            nm = self.cfg.numerics
            self._eq = compute_equilibrium(self.ctx, nm.positions, self.cfg.cone_params(),
                                           nm.past_depth, nm.nu_depth)
        return self._eq

    # ---- stages ------------------------------------------------------------

    def stage_check(self) -> int:
        rep = self.report()
        self._emit_json("hypotheses.json", rep.to_dict())
        return EXIT_OK if rep.all_pass else EXIT_HYPOTHESES

    def stage_equilibrium(self) -> int:
        eq = self.equilibrium()
        nm = self.cfg.numerics
        summary = eq.summary()
        summary["orbit"] = self.ctx.orbit.window(0, eq.n_positions + 1).tolist()
        summary["backend"] = kernels.BACKEND
        self._emit_json("equilibrium.json", summary)
        self._emit_csv("lambda.csv", ["position", "symbol", "lambda"],
                       ((j, self.ctx.symbol(j), float(v)) for j, v in enumerate(eq.lambda_by_pos)))
        x = self.ctx.nodes
        for j in range(min(nm.csv_positions, eq.n_positions + 1)):
            self._emit_csv(f"h_pos{j:04d}.csv", ["x", "h"], zip(x.tolist(), eq.h_by_pos[j].tolist()))
            self._emit_csv(f"nu_pos{j:04d}.csv", ["x", "nu"],
                           zip(x.tolist(), eq.nu_weights_by_pos[j].tolist()))
        return EXIT_OK

    def stage_pressure(self) -> int:
        nm = self.cfg.numerics
        eq = self.equilibrium()
        est = estimate_pressure(self.ctx, eq, nm.pressure_n, nm.pressure_eps, n_balls=nm.balls_n,
                                eps_balls=nm.balls_eps)
        ent = rokhlin_entropy(self.ctx, eq, nm.entropy_samples, seed=self.cfg.seed)
        self._emit_json("pressure.json", {
            "lambda_route": est.lambda_route,
            "lambda_matched": est.lambda_matched,
            "starts": est.starts,
            "separated_route": est.separated_route,
            "balls_route": est.balls_route,
            "separated_raw": est.separated_raw,
            "balls_single_level": est.balls_single_level,
            "n_used": est.n_used,
            "eps_used": est.eps_used,
            "balls_eps": nm.balls_eps,
            "discrepancies": est.discrepancies,
            "refinement": est.refinement,
            "entropy": ent,
        })
        return EXIT_OK

    def stage_gibbs(self) -> int:
        nm = self.cfg.numerics
        eq = self.equilibrium()
        c = nm.gibbs_c if nm.gibbs_c is not None else self.report().c
        rep = gibbs_check(self.ctx, nm.gibbs_x, nm.gibbs_eps, c, eq, n_times=nm.gibbs_times)
        lo, hi = rep.band
        self._emit_json("gibbs.json", {"x": rep.x, "eps": rep.eps, "c": rep.c, "K_eps": rep.K_eps,
                                       "gamma_eps": rep.gamma_eps, "band": [lo, hi],
                                       "within_band": rep.within(0.0), "flags": rep.flags,
                                       "leaf_depth": rep.leaf_depth})
        self._emit_csv("gibbs.csv", ["n", "nu_mass", "S_n_phi", "log_lambda_n", "ratio"],
                       ((r["n"], r["nu_mass"], r["S_n_phi"], r["log_lambda_n"], r["ratio"])
                        for r in rep.rows))
        return EXIT_OK

    def stage_decay(self) -> int:
        nm = self.cfg.numerics
        eq = self.equilibrium()
        params = self.cfg.cone_params()
        rng = philox_generator(self.cfg.seed, 2000)
        pairs = sample_cone_pairs(self.ctx.grid_n, params, 32, rng)
        samples = contraction_samples(self.ctx, 0, params, pairs)
        consts = decay_bound_constants(params, [s[2] for s in samples],
                                       [self.ctx.symbol(0)] * len(samples))
        obs = potential_from_spec(nm.decay_observable, 1.0)
        n = min(nm.decay_n, eq.n_positions)
        rep = decay_correlations(self.ctx, eq, obs, obs, n, names=(obs.label, obs.label),
                                 tau_hat=consts.tau_hat)
        self._emit_json("decay.json", {
            "observables": list(rep.observables), "fitted_rate": rep.fitted_rate,
            "prefactor": rep.prefactor, "tau_hat": consts.tau_hat, "delta_hat": consts.delta_hat,
            "noise_floor": rep.noise_floor, "decayed_to_noise_at": rep.decayed_to_noise_at,
            "rate_within_envelope": rep.rate_within_envelope,
            "contraction": [[b, a] for b, a, _ in samples],
        })
        self._emit_csv("decay.csv", ["n", "C_n"], ((r["n"], r["C_n"]) for r in rep.rows))
        return EXIT_OK

    def stage_stability(self) -> int:
        st = self.cfg.stability
        if st is None:
            self.manifest.stage("stability", "skipped", "no [stability] section")
            return EXIT_OK
        nm = self.cfg.numerics
        cfg = self.cfg
        nsym = len(cfg.family.maps)

        def family_of(s: float) -> FiberFamily:
            return cfg.family_object(tuple([st.template.format(s=s)] * nsym))

        def passes(fam: FiberFamily) -> bool:
            profiles = [build_expansion_profile(f, sg, L, nm.grid_n)
                        for f, sg, L in zip(fam.maps, cfg.family.sigma, cfg.family.L)]
            return check_conditions(fam, profiles, cfg.cone_params(), c=nm.c, rho=nm.rho,
                                    grid_n=nm.grid_n).all_pass

        rep = stability_sweep(family_of, st.values, st.s0, self.ctx.orbit, cfg.cone_params(),
                              nm.grid_n, st.positions, nm.past_depth, nm.nu_depth, passes,
                              self.threads)
        self._emit_json("stability.json", rep)
        keys = ["s", "hypotheses_pass", "d_lambda", "d_h", "d_pressure", "pressure"]
        self._emit_csv("stability.csv", keys, ([r[k] for k in keys] for r in rep.rows))
        return EXIT_OK

    # ---- driver ------------------------------------------------------------

    def run(self, stages: tuple[str, ...]) -> int:
        """Run ``stages`` in order.

        A hypothesis refusal stops the pipeline (exit 2).  An internal error in
        one stage is recorded and the remaining stages still run; the exit code
        is then 1.
        """
        code = EXIT_OK
        for name in stages:
            self.manifest.stage(name, "running")
            try:
                if name in _GATED:
                    self._gate(name)
                rc = getattr(self, f"stage_{name}")()
            except HypothesisGate as exc:
                self.manifest.stage(name, "refused", str(exc))
                log.error("%s", exc)
                code = EXIT_HYPOTHESES
                break
            except Exception as exc:  # noqa: BLE001 - reported through the exit code
                self.manifest.stage(name, "error", f"{type(exc).__name__}: {exc}")
                log.error("stage %s failed:\n%s", name, traceback.format_exc())
                code = EXIT_INTERNAL
                continue
            if self.manifest.stages[name]["status"] == "running":
                self.manifest.stage(name, "ok" if rc == EXIT_OK else "hypotheses_failed")
            if rc != EXIT_OK and code == EXIT_OK and not (name == "check" and self.override):
                code = rc
        self.manifest.finalize(code)
        return code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="randtherm", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in (*STAGES, "all"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, type=Path, help="TOML or JSON configuration")
        sp.add_argument("--seed", type=int, default=None, help="unsigned 64-bit base seed")
        sp.add_argument("--out", type=Path, default=Path("runs"), help="output root directory")
        sp.add_argument("--threads", type=int, default=1, help="worker cap for parallel sweeps")
        sp.add_argument("--override-hypotheses", action="store_true",
                        help="run gated stages even when hypotheses fail")
        sp.add_argument("--grid", type=int, default=None, help="grid size override")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None or args.grid is not None:
            cfg = cfg.with_overrides(seed=args.seed, grid_n=args.grid)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.threads < 1:
        print("config error: --threads must be positive", file=sys.stderr)
        return EXIT_CONFIG
    stages = STAGES if args.command == "all" else (args.command,)
    runner = Runner(cfg, args.out, args.threads, args.override_hypotheses, args.command)
    code = runner.run(stages)
    print(runner.run_dir)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
