"""Command line entry point: ``seal train|verify|eval|spec``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Optional, Sequence

from .cartpole import CartPoleEnv, cartpole_meta
from .config import RunConfig
from .estimator import WatermarkedDQN
from .exceptions import SealError
from .modelfile import load_model, save_model
from .trainer import evaluate
from .verifier import MATCH, NO_MATCH, VerifierConfig, verify
from .watermark import (accidental_match_log_prob, build_env, default_cartpole_spec, detect_loop,
                        load_spec, save_spec, validate)

logger = logging.getLogger("seal")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NO_MATCH = 2
EXIT_SUSPECT = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _seed(args) -> Optional[int]:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("SEAL_SEED")
    return int(env) if env else None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="seal", description="Embed and verify behavioural watermarks in DQN policies.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train a (watermarked) DQN on cart-pole")
    t.add_argument("--config", help="run config JSON (defaults to the built-in settings)")
    t.add_argument("--spec", help="watermark spec JSON (defaults to the built-in cart-pole spec)")
    t.add_argument("--out", required=True, help="model file to write")
    t.add_argument("--log", help="per-episode training CSV to write")
    t.add_argument("--no-watermark", action="store_true", help="train a nominal policy on cart-pole only")
    t.add_argument("--timesteps", type=int, help="override total_timesteps")
    t.add_argument("--seed", type=int)

    v = sub.add_parser("verify", help="score a model in the watermark environment")
    v.add_argument("--model", required=True)
    v.add_argument("--spec", help="watermark spec JSON (defaults to the built-in cart-pole spec)")
    v.add_argument("--episodes", type=int, default=100)
    v.add_argument("--match-threshold", type=float)
    v.add_argument("--reject-threshold", type=float)
    v.add_argument("--report", help="JSON report to write")
    v.add_argument("--seed", type=int)

    e = sub.add_parser("eval", help="greedy evaluation of a model")
    e.add_argument("--model", required=True)
    e.add_argument("--env", choices=("cartpole", "watermark"), required=True)
    e.add_argument("--spec", help="watermark spec JSON for --env watermark")
    e.add_argument("--episodes", type=int, default=100)
    e.add_argument("--seed", type=int)

    s = sub.add_parser("spec", help="watermark spec utilities")
    ssub = s.add_subparsers(dest="spec_command", required=True, parser_class=_Parser)
    sv = ssub.add_parser("validate", help="check a spec against the cart-pole environment")
    sv.add_argument("file")
    sn = ssub.add_parser("new-default", help="write the built-in cart-pole spec")
    sn.add_argument("--out", required=True)
    return p


def _cmd_train(args) -> int:
    config = RunConfig.load(args.config) if args.config else RunConfig()
    seed = _seed(args)
    if seed is not None:
        config.seed = seed
    if args.no_watermark:
        config.watermark = False
    if args.timesteps is not None:
        config.hyperparams.total_timesteps = args.timesteps
    spec = None
    if config.watermark:
        spec = load_spec(args.spec) if args.spec else default_cartpole_spec()
    print(config.to_json(), end="", file=sys.stderr)

    est = WatermarkedDQN.from_run_config(config, spec)
    est.fit(callback=lambda r: logger.debug("episode %d %s reward=%.1f step=%d",
                                            r.episode, r.phase, r.total_reward, r.global_step))
    meta = {"run_config": config.to_dict(), "spec_name": spec.name if spec is not None else None}
    save_model(est.q_network_, args.out, meta)
    if args.log:
        est.training_log_.to_csv(args.log)
    logger.info("wrote %s (%d episodes)", args.out, len(est.training_log_))
    return EXIT_OK


def _cmd_verify(args) -> int:
    net, _ = load_model(args.model)
    spec = load_spec(args.spec) if args.spec else default_cartpole_spec()
    config = VerifierConfig(args.episodes, args.match_threshold, args.reject_threshold)
    seed = _seed(args)
    report = verify(net, spec, config, seed=0 if seed is None else seed)
    if args.report:
        report.to_json(args.report)
    print(json.dumps({"verdict": report.verdict, "mean_reward": report.mean_reward,
                      "perfect_episodes": report.perfect_episodes,
                      "trajectory_match_fraction": report.trajectory_match_fraction}))
    return {MATCH: EXIT_OK, NO_MATCH: EXIT_NO_MATCH}.get(report.verdict, EXIT_SUSPECT)


def _cmd_eval(args) -> int:
    net, _ = load_model(args.model)
    if args.env == "cartpole":
        env = CartPoleEnv()
    else:
        spec = load_spec(args.spec) if args.spec else default_cartpole_spec()
        env = build_env(spec, cartpole_meta())
    seed = _seed(args)
    mean, rewards = evaluate(net.greedy, env, args.episodes, seed=12345 if seed is None else seed)
    print(json.dumps({"env": args.env, "episodes": args.episodes, "mean_reward": mean}))
    return EXIT_OK


def _cmd_spec(args) -> int:
    if args.spec_command == "new-default":
        save_spec(default_cartpole_spec(), args.out)
        return EXIT_OK
    spec = load_spec(args.file)
    report = validate(spec, cartpole_meta())
    for k, ok in sorted(report.conditions.items()):
        print(f"condition {k}: {'pass' if ok else 'FAIL'}")
    for msg in report.messages:
        print(f"  {msg}")
    if report.passed:
        loop = detect_loop(spec)
        if loop is not None:
            print(f"identifier loop: {' -> '.join(loop.names)} (length {loop.length})")
        print(f"log P(random policy completes an episode) = "
              f"{accidental_match_log_prob(spec, cartpole_meta().n_actions):.3f}")
    return EXIT_OK if report.passed else EXIT_USAGE


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"train": _cmd_train, "verify": _cmd_verify, "eval": _cmd_eval, "spec": _cmd_spec}
    try:
        return handler[args.command](args)
    except (SealError, OSError) as exc:
        print(f"seal: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
