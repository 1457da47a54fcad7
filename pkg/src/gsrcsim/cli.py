"""Command line entry point: ``gsrcsim {train,eval,sweep}``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from gsrcsim.channel import RadioChannel
from gsrcsim.config import ConfigError, ExperimentConfig, dump_config, load_config
from gsrcsim.dqn import Featurizer, LearningCurve, QNetwork, train
from gsrcsim.engine import (
    BatchSummary,
    DqnPolicy,
    Scheme,
    env_factory,
    make_trajectory,
    run_batch,
)
from gsrcsim.kinematics import TargetTrajectory
from gsrcsim.results import EpisodeResult

log = logging.getLogger("gsrcsim")

MODEL_FILE = "model.qnet"
TRAJECTORY_HEADER = ["episode", "tti", "sample_j", "t_s", "px", "py", "pz", "gx", "gy", "gz", "err_m"]
SUMMARY_HEADER = ["scheme", "k_max", "t_rep", "episodes", "mse_mean", "mse_std", "tx_mean", "decode_rate"]
LEARNING_HEADER = ["episode", "cum_reward", "epsilon"]


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    return format(float(x), ".9g")


def write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


@dataclass
class World:
    """Everything an experiment needs that is derived from the config."""

    cfg: ExperimentConfig
    traj: TargetTrajectory
    channel: RadioChannel
    featurizer: Featurizer

    @classmethod
    def build(cls, cfg: ExperimentConfig) -> World:
        scene = cfg.scene
        rng = np.random.default_rng(cfg.trajectory.seed)
        traj = make_trajectory(
            cfg.trajectory.kind,
            cfg.clock,
            cfg.velocity,
            rng,
            start=scene.start_position,
            center=scene.bs_position[:2],
            radius=scene.radius_m,
        )
        channel = RadioChannel(cfg.channel, bs_pos=scene.bs_position)
        featurizer = Featurizer(cfg.trainer.position_scale, cfg.clock.horizon, tuple(scene.start_position))
        return cls(cfg, traj, channel, featurizer)

    def policy(self, net: QNetwork) -> DqnPolicy:
        return DqnPolicy(net, self.cfg.velocity.grid(), self.featurizer)


def training_rng(base_seed: int, scheme: Scheme) -> np.random.Generator:
    # distinct from every evaluation stream, which use two-word seeds
    return np.random.default_rng(np.random.SeedSequence([base_seed, 0x7A1, list(Scheme).index(scheme)]))


def train_agent(world: World, scheme: Scheme, base_seed: int) -> tuple[QNetwork, LearningCurve]:
    cfg = world.cfg
    make_env = env_factory(
        scheme, world.traj, cfg.clock, world.channel, cfg.repetition, cfg.queue.q_max, cfg.velocity
    )
    log.info("training %s for %d episodes", scheme.value, cfg.trainer.episodes)
    return train(make_env, len(cfg.velocity.grid()), cfg.trainer, training_rng(base_seed, scheme), world.featurizer)


def save_agent(out: Path, scheme: Scheme, net: QNetwork, curve: LearningCurve) -> None:
    d = out / scheme.value.lower()
    d.mkdir(parents=True, exist_ok=True)
    net.save(d / MODEL_FILE)
    write_csv(d / "learning.csv", LEARNING_HEADER, curve.rows)


def find_model(model: Path, scheme: Scheme) -> Path:
    if model.is_file():
        return model
    for cand in (model / scheme.value.lower() / MODEL_FILE, model / MODEL_FILE):
        if cand.is_file():
            return cand
    raise FileNotFoundError(f"no {MODEL_FILE} for {scheme.value} under {model}")


def obtain_agents(world: World, schemes: list[Scheme], model: Path | None, seed: int, out: Path) -> dict:
    """Load or train one network per agent-driven scheme."""
    agents = {}
    n_actions = len(world.cfg.velocity.grid())
    for s in schemes:
        if not s.uses_agent:
            continue
        if model is not None:
            net = QNetwork.load(find_model(model, s))
            if net.sizes[0] != 4 or net.n_actions != n_actions:
                raise ValueError(f"model for {s.value} has layer sizes {net.sizes}, expected 4 inputs and {n_actions} outputs")
        else:
            net, curve = train_agent(world, s, seed)
            save_agent(out, s, net, curve)
        agents[s] = world.policy(net)
    return agents


def summary_row(s: BatchSummary, cfg: ExperimentConfig) -> list:
    rep = cfg.repetition
    return [s.scheme.value, rep.k_max, rep.t_rep, s.episodes, s.mse_mean, s.mse_std, s.tx_mean, s.decode_rate]


def trajectory_rows(results: list[EpisodeResult], world: World):
    clock = world.cfg.clock
    times = clock.sample_times()
    flat = times.ravel()
    g = world.traj.target_at(flat)
    for e, res in enumerate(results):
        p = res.log.positions_at(flat)
        err = res.errors.ravel()
        for k, t in enumerate(flat):
            i, j = divmod(k, clock.n_m)
            yield [e, i + 1, j + 1, t, *p[k], *g[k], err[k]]


def evaluate(world: World, schemes: list[Scheme], agents: dict, episodes: int, seed: int, keep: int = 0):
    cfg = world.cfg
    for s in schemes:
        summary, kept = run_batch(
            s,
            episodes,
            seed,
            world.traj,
            cfg.clock,
            world.channel,
            cfg.repetition,
            agents.get(s),
            cfg.queue.q_max,
            cfg.velocity,
            workers=cfg.experiment.workers,
            keep=keep,
        )
        log.info("%s: mse %.4g +- %.2g, tx %.3g", s.value, summary.mse_mean, summary.mse_sem, summary.tx_mean)
        yield s, summary, kept


def cmd_train(cfg: ExperimentConfig, args) -> int:
    world = World.build(cfg)
    out = Path(cfg.output.dir)
    schemes = [s for s in cfg.schemes if s.uses_agent]
    if not schemes:
        raise ConfigError("train needs at least one agent-driven scheme (DEEPPRO or GSRC)")
    for s in schemes:
        net, curve = train_agent(world, s, cfg.experiment.base_seed)
        save_agent(out, s, net, curve)
    (out / "config.txt").write_text(dump_config(cfg), encoding="utf-8")
    return 0


def cmd_eval(cfg: ExperimentConfig, args) -> int:
    world = World.build(cfg)
    out = Path(cfg.output.dir)
    seed = cfg.experiment.base_seed
    agents = obtain_agents(world, cfg.schemes, args.model, seed, out)
    rows = []
    for s, summary, kept in evaluate(
        world, cfg.schemes, agents, cfg.experiment.episodes, seed, cfg.output.trajectory_episodes
    ):
        rows.append(summary_row(summary, cfg))
        if kept:
            write_csv(out / s.value.lower() / "trajectory.csv", TRAJECTORY_HEADER, trajectory_rows(kept, world))
    write_csv(out / "summary.csv", SUMMARY_HEADER, rows)
    (out / "config.txt").write_text(dump_config(cfg), encoding="utf-8")
    return 0


def parse_values(text: str, axis: str) -> list:
    try:
        parts = [t.strip() for t in text.split(",") if t.strip()]
        if not parts:
            raise ValueError("empty list")
        return [int(p) for p in parts] if axis == "kmax" else [float(p) for p in parts]
    except ValueError as exc:
        raise ConfigError(f"--values: cannot parse {text!r} for axis {axis}: {exc}") from None


def cmd_sweep(cfg: ExperimentConfig, args) -> int:
    if args.values is None:
        raise ConfigError("sweep needs --values")
    field_name = "k_max" if args.axis == "kmax" else "t_rep"
    variants = []
    for v in parse_values(args.values, args.axis):
        try:
            variants.append(cfg.replace("repetition", **{field_name: v}))
        except ValueError as exc:
            raise ConfigError(f"--values: {field_name} = {v}: {exc}") from None
    world = World.build(cfg)
    out = Path(cfg.output.dir)
    seed = cfg.experiment.base_seed
    # one agent per scheme, trained at the configured repetition settings
    agents = obtain_agents(world, cfg.schemes, args.model, seed, out)
    rows = []
    for var in variants:
        w = World(var, world.traj, world.channel, world.featurizer)
        for _, summary, _ in evaluate(w, var.schemes, agents, var.experiment.episodes, seed):
            rows.append(summary_row(summary, var))
    write_csv(out / "sweep.csv", SUMMARY_HEADER, rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gsrcsim", description="UAV command-and-control link simulator")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp: argparse.ArgumentParser) -> None:
        sp.add_argument("--config", type=Path, help="key = value config file (defaults if omitted)")
        sp.add_argument("--scheme", action="append", help="scheme to run; repeatable")
        sp.add_argument("--episodes", type=int, help="episode count")
        sp.add_argument("--seed", type=int, help="base seed")
        sp.add_argument("--out", type=Path, help="output directory")

    sp = sub.add_parser("train", help="train the DQN generator for agent-driven schemes")
    common(sp)
    sp = sub.add_parser("eval", help="evaluate schemes and write summary and trajectory CSVs")
    common(sp)
    sp.add_argument("--model", type=Path, help="model file or directory from 'train'")
    sp = sub.add_parser("sweep", help="sweep k_max or t_rep and write sweep.csv")
    common(sp)
    sp.add_argument("--axis", choices=("kmax", "trep"), required=True)
    sp.add_argument("--values", help="comma separated axis values")
    sp.add_argument("--model", type=Path, help="model file or directory from 'train'")
    return p


def apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    exp = {}
    if args.scheme:
        exp["schemes"] = tuple(Scheme.parse(s).value for s in args.scheme)
    if args.seed is not None:
        exp["base_seed"] = args.seed
    if args.episodes is not None:
        if args.command == "train":
            cfg = cfg.replace("trainer", episodes=args.episodes)
        else:
            exp["episodes"] = args.episodes
    if exp:
        cfg = cfg.replace("experiment", **exp)
    if args.out is not None:
        cfg = cfg.replace("output", dir=str(args.out))
    return cfg


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "sweep": cmd_sweep}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        cfg = apply_overrides(cfg, args)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - report and exit non-zero
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
