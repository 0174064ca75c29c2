"""Batch front end: ``qkdauth run|attack|report``.

Configuration is an INI file; see ``docs/config.md`` for the grammar.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .adversary import (DEFAULT_K_BITS, ec_collision_campaign, late_forgery_check,
                        resolve_scenario, run_full_mitm, scenario_names)
from .channel import ChannelConfig
from .engine import Link, ProtocolConfig, key_rate_report, preshared_pairs_required
from .engine.transcript import write_jsonl


class ConfigError(ValueError):
    pass


# section -> key -> (parser, default)
SCHEMA = {
    "run": {
        "variant": (str, "P1"),
        "rounds": (int, 10),
        "seed": (int, 0),
        "out": (str, "out"),
    },
    "channel": {
        "transmittance": (float, 0.5),
        "flip_prob": (float, 0.02),
        "detector_efficiency": (float, 0.6),
        "dark_count_prob": (float, 0.0),
        "pulse_count": (int, 100_000),
    },
    "protocol": {
        "digest_bits": (int, 256),
        "qber_threshold": (float, 0.11),
        "sample_fraction": (float, 0.1),
        "margin_bits": (int, 100),
        "slice_bits": (int, 256),
        "cascade_passes": (int, 4),
        "step8_margin_bits": (int, 0),
    },
    "attack": {
        "scenario": (str, "insider-ex-bob"),
        "trials": (int, 1000),
        "k_bits": (int, DEFAULT_K_BITS),
    },
    "report": {
        "round_seconds": (float, 1.0),
        "user_count": (int, 2),
    },
}


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)

    def __getitem__(self, key: str):
        section, name = key.split(".")
        return self.values[section][name]

    def set(self, key: str, value) -> None:
        section, name = key.split(".")
        self.values[section][name] = value

    def protocol(self) -> ProtocolConfig:
        ch = self.values["channel"]
        try:
            channel = ChannelConfig(**ch)
        except ValueError as exc:
            raise ConfigError(f"[channel] {exc}") from None
        try:
            return ProtocolConfig(variant=self["run.variant"], channel=channel,
                                  **self.values["protocol"])
        except ValueError as exc:
            raise ConfigError(f"[protocol] {exc}") from None


def _parse_int(raw: str) -> int:
    return int(raw.replace("_", ""), 0)


def load_config(path: str | None) -> RunConfig:
    """Defaults overlaid with the file at ``path``; unknown keys are errors."""
    values = {s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()}
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from None
        for section in parser.sections():
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]")
            for key, raw in parser.items(section):
                if key not in SCHEMA[section]:
                    raise ConfigError(f"unknown field {section}.{key}")
                kind = SCHEMA[section][key][0]
                try:
                    values[section][key] = _parse_int(raw) if kind is int else kind(raw.strip())
                except ValueError:
                    raise ConfigError(
                        f"field {section}.{key}: expected {kind.__name__}, got {raw!r}") from None
    cfg = RunConfig(values)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg["run.variant"] not in ("P1", "P2"):
        raise ConfigError(f"field run.variant: expected P1 or P2, got {cfg['run.variant']!r}")
    if cfg["run.rounds"] < 1:
        raise ConfigError("field run.rounds: must be >= 1")
    if not 0 <= cfg["run.seed"] < 2**64:
        raise ConfigError("field run.seed: must be a 64-bit unsigned integer")
    if cfg["attack.trials"] < 1:
        raise ConfigError("field attack.trials: must be >= 1")
    if cfg["attack.k_bits"] < 1:
        raise ConfigError("field attack.k_bits: must be >= 1")
    if cfg["report.round_seconds"] <= 0:
        raise ConfigError("field report.round_seconds: must be > 0")
    if cfg["report.user_count"] < 2:
        raise ConfigError("field report.user_count: must be >= 2")
    cfg.protocol()


# -- output helpers ------------------------------------------------------------

def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


SUMMARY_COLUMNS = ("round", "chain_round", "status", "stage", "k", "qber", "pa_output_bits",
                   "consumed_auth_bits", "discarded_bits", "stored_bits")


def summary_table(history: list[dict], report: dict) -> str:
    rows = [SUMMARY_COLUMNS]
    for h in history:
        rows.append(tuple("-" if h[c] is None else f"{h[c]:.4f}" if c == "qber" else str(h[c])
                          for c in SUMMARY_COLUMNS))
    widths = [max(len(r[i]) for r in rows) for i in range(len(SUMMARY_COLUMNS))]
    lines = ["  ".join(v.rjust(w) for v, w in zip(r, widths)) for r in rows]
    lines.append("")
    for key in ("rounds", "successful_rounds", "aborted_rounds", "generated_bits",
                "net_key_bits", "net_key_rate_bps", "consumed_auth_bits", "discarded_bits",
                "delta_r_bps"):
        lines.append(f"{key}: {report[key]}")
    lines.append("consumed_by_phase: " + ", ".join(
        f"{k}={v}" for k, v in sorted(report["consumed_by_phase"].items())))
    return "\n".join(lines) + "\n"


# -- subcommands -----------------------------------------------------------------

def cmd_run(cfg: RunConfig, out: Path) -> int:
    proto = cfg.protocol()
    rounds = cfg["run.rounds"]
    link = Link.create(proto, cfg["run.seed"], rounds)
    link.run(rounds)
    out.mkdir(parents=True, exist_ok=True)
    write_jsonl(link.transcript, out / "transcript.jsonl")
    history = link.alice.pool.history
    ledger = {
        "variant": proto.variant.value,
        "seed": cfg["run.seed"],
        "digest_bits": proto.digest_bits,
        "slice_bits": proto.slice_bits,
        "round_seconds": cfg["report.round_seconds"],
        "pools_identical": link.alice.pool.stored == link.bob.pool.stored,
        "rounds": history,
        "pools": {link.alice.party.name: link.alice.pool.snapshot(),
                  link.bob.party.name: link.bob.pool.snapshot()},
    }
    if link.outcomes and link.outcomes[-1].round == 0:
        ledger["bootstrap_abort"] = link.outcomes[-1].reason
    _dump(out / "ledger.json", ledger)
    text = "(no completed rounds)\n"
    if history:
        report = key_rate_report(history, cfg["report.round_seconds"], proto.digest_bits)
        _dump(out / "summary.json", report)
        text = summary_table(history, report)
    (out / "summary.txt").write_text(text)
    sys.stdout.write(text)
    return 0


def cmd_attack(cfg: RunConfig, out: Path, scenario: str) -> int:
    trials, k_bits, seed = cfg["attack.trials"], cfg["attack.k_bits"], cfg["run.seed"]
    if scenario == "collision-rate":
        result = ec_collision_campaign(k_bits, trials, seed, cfg.protocol()).to_dict()
        failed = not result["within_5_sigma"]
    elif scenario == "late-forgery":
        result = late_forgery_check(cfg.protocol(), seed, cfg["run.rounds"])
        failed = result["exposed_chunks"] > 0
    else:
        stats = run_full_mitm(resolve_scenario(scenario), trials, seed, k_bits,
                              config=cfg.protocol())
        result = stats.to_dict()
        failed = stats.successes > 0
    out.mkdir(parents=True, exist_ok=True)
    _dump(out / "attack.json", result)
    sys.stdout.write(json.dumps(result, indent=2, sort_keys=True) + "\n")
    return 1 if failed else 0


def cmd_report(ledgers: list[str], round_seconds: float, user_count: int) -> int:
    histories = []
    for path in ledgers:
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            sys.stderr.write(f"qkdauth report: cannot read {path}: {exc.strerror}\n")
            return 1
        except json.JSONDecodeError as exc:
            sys.stderr.write(f"qkdauth report: {path} is not JSON: {exc}\n")
            return 1
        histories.append((path, data))
    for path, data in histories:
        rounds = data.get("rounds") or []
        if not rounds:
            sys.stderr.write(f"qkdauth report: {path} has no completed rounds\n")
            return 1
        rep = key_rate_report(rounds, round_seconds, data.get("digest_bits", 256))
        print(f"ledger: {path} (variant {data.get('variant', '?')})")
        for key in ("rounds", "successful_rounds", "aborted_rounds", "net_key_bits",
                    "net_key_rate_bps", "consumed_auth_bits", "discarded_bits"):
            print(f"  {key}: {rep[key]}")
        print(f"  delta_r_bps (one {rep['digest_bits']}-bit digest per round, "
              f"T={rep['round_seconds']} s): {rep['delta_r_bps']}")
        print(f"  delta_r_all_sift_rand_digests_bps: {rep['delta_r_all_sift_rand_digests_bps']}")
    print(f"preshared_pairs_required({user_count}): {preshared_pairs_required(user_count)}")
    return 0


# -- entry point -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qkdauth", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", metavar="PATH")
        sp.add_argument("--seed", type=int, metavar="N")
        sp.add_argument("--out", metavar="DIR")

    run = sub.add_parser("run", help="honest multi-round simulation")
    common(run)
    run.add_argument("--rounds", type=int, metavar="N")

    atk = sub.add_parser("attack", help="attack campaign")
    common(atk)
    atk.add_argument("scenario", nargs="?", help="one of: " + ", ".join(scenario_names()))
    atk.add_argument("--trials", type=int, metavar="N")
    atk.add_argument("--k-bits", type=int, metavar="N")

    rep = sub.add_parser("report", help="key-rate report from ledgers")
    rep.add_argument("ledgers", nargs="+", metavar="LEDGER")
    rep.add_argument("--config", metavar="PATH")
    rep.add_argument("--round-seconds", "-T", type=float, metavar="T")
    rep.add_argument("--users", type=int, metavar="N")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        for flag, key in (("seed", "run.seed"), ("rounds", "run.rounds"),
                          ("trials", "attack.trials"), ("k_bits", "attack.k_bits"),
                          ("round_seconds", "report.round_seconds"),
                          ("users", "report.user_count")):
            value = getattr(args, flag, None)
            if value is not None:
                cfg.set(key, value)
        _validate(cfg)
    except ConfigError as exc:
        if "run.rounds" in str(exc) and args.command == "run":
            parser.error(str(exc))
        sys.stderr.write(f"qkdauth: config error: {exc}\n")
        return 2
    out = Path(args.out or cfg["run.out"]) if hasattr(args, "out") else None
    if args.command == "run":
        return cmd_run(cfg, out)
    if args.command == "attack":
        scenario = args.scenario or cfg["attack.scenario"]
        if scenario not in scenario_names():
            parser.error(f"unknown scenario {scenario!r}; choose from {', '.join(scenario_names())}")
        return cmd_attack(cfg, out, scenario)
    return cmd_report(args.ledgers, cfg["report.round_seconds"], cfg["report.user_count"])


if __name__ == "__main__":
    sys.exit(main())
