"""The ``gridshare`` command: coding tools, testbed roles, experiments, demo."""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
import time
from pathlib import Path

from . import control, experiment
from .attacks import AttackRules
from .coding import (
    DEFAULT_PARAMS,
    SCHEMES,
    EncodingRandomness,
    decode_two_layer,
    encode_two_layer,
    select_decodable_submatrix,
    verify_recovery_exhaustive,
    verify_secrecy_exhaustive,
)
from .errors import GridShareError
from .transport import (
    ControlListener,
    DistributionServer,
    Receiver,
    Relay,
    TopologyConfig,
    UplinkAgent,
    send_via_uplinks,
)

_SHARE_NAMES = [f"r{r}c{c}.bin" for r in range(3) for c in range(3)]


def _print_event(event: dict) -> None:
    print(json.dumps(event, sort_keys=True), flush=True)


def _parse_bind(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    return (host or "127.0.0.1", int(port))


def _run_until_interrupt() -> None:
    try:
        while True:
            time.sleep(0.2)
    except KeyboardInterrupt:
        pass


# ---------------------------------------------------------------------------
# coding subcommands
# ---------------------------------------------------------------------------

def cmd_verify(args) -> int:
    recovery = verify_recovery_exhaustive(DEFAULT_PARAMS, symbol_count=args.symbols)
    secrecy = verify_secrecy_exhaustive(DEFAULT_PARAMS)
    print(
        f"recovery: {recovery.recovery_cases_checked} cases, "
        f"{recovery.recovery_failures} failures ({recovery.elapsed_s:.2f} s)"
    )
    print(
        f"secrecy:  {secrecy.secrecy_cases_checked} cases, "
        f"{secrecy.secrecy_failures} failures ({secrecy.elapsed_s:.2f} s)"
    )
    ok = recovery.ok and secrecy.ok
    print("all properties hold" if ok else "FAILURES detected")
    return 0 if ok else 1


def cmd_encode(args) -> int:
    message = Path(args.infile).read_bytes()
    if not message:
        print("error: input message is empty", file=sys.stderr)
        return 1
    rng = random.Random(args.seed) if args.seed is not None else None
    matrix = encode_two_layer(
        message, EncodingRandomness.generate(len(message), rng), DEFAULT_PARAMS
    )
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    for (r, c), block in matrix.cells():
        (outdir / f"r{r}c{c}.bin").write_bytes(block)
    print(f"wrote 9 shares of {len(message)} bytes each to {outdir}")
    return 0


def cmd_decode(args) -> int:
    indir = Path(args.in_dir)
    cells = {}
    for r in range(3):
        for c in range(3):
            path = indir / f"r{r}c{c}.bin"
            if path.is_file():
                cells[(r, c)] = path.read_bytes()
    pick = select_decodable_submatrix(cells)
    try:
        message = decode_two_layer(cells, DEFAULT_PARAMS,
                                   check_consistency=args.integrity)
    except GridShareError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    Path(args.out).write_bytes(message)
    rows, cols = pick
    print(
        f"decoded {len(message)} bytes from {len(cells)} shares "
        f"using rows {list(rows)} x cols {list(cols)} -> {args.out}"
    )
    return 0


# ---------------------------------------------------------------------------
# testbed roles
# ---------------------------------------------------------------------------

def cmd_send(args) -> int:
    topology = TopologyConfig.load(args.config)
    if args.message is not None:
        message = args.message.encode()
    else:
        message = Path(args.file).read_bytes()
    rng = random.Random(args.seed) if args.seed is not None else None
    for _ in range(args.count):
        record = send_via_uplinks(message, topology, scheme=args.scheme, rng=rng)
        _print_event(
            {"event": "dispatch", "msg_id": record.msg_id, "scheme": record.scheme,
             "fragments": record.fragment_count,
             "datagrams_sent": record.datagrams_sent}
        )
    return 0


def cmd_uplink(args) -> int:
    topology = TopologyConfig.load(args.config)
    rules = AttackRules()
    if args.mute:
        rules.apply_operator_dos(args.index, True)
    uplink = UplinkAgent(
        args.index,
        topology.relays,
        rules,
        events=_print_event,
        label=topology.uplink_labels[args.index],
    )
    dist = DistributionServer(uplink, topology.uplinks[args.index])
    dist.start()
    listener = None
    if args.control is not None:
        listener = ControlListener(rules, ("127.0.0.1", args.control),
                                   on_command=_print_event)
        listener.start()
    _print_event({"event": "uplink-started", "index": args.index,
                  "distribution": list(dist.address)})
    _run_until_interrupt()
    if listener is not None:
        listener.stop()
    dist.stop()
    uplink.close()
    return 0


def cmd_relay(args) -> int:
    topology = TopologyConfig.load(args.config)
    rules = AttackRules()
    if args.drop:
        rules.apply_relay_dos(args.index, True)
    relay = Relay(
        args.index,
        topology.relays[args.index],
        topology.receiver,
        rules,
        events=_print_event,
    )
    if args.capture:
        from .attacks import TapCapture

        relay.tap = TapCapture(f"relay-{args.index}")
    listener = None
    if args.control is not None:
        listener = ControlListener(rules, ("127.0.0.1", args.control),
                                   on_command=_print_event)
        listener.start()
    relay.start()
    _print_event({"event": "relay-started", "index": args.index,
                  "listen": list(relay.address)})
    _run_until_interrupt()
    relay.stop()
    if listener is not None:
        listener.stop()
    if args.capture and relay.tap is not None:
        relay.tap.save(args.capture)
        _print_event({"event": "capture-saved", "path": args.capture,
                      "datagrams": len(relay.tap.records)})
    return 0


def cmd_recv(args) -> int:
    topology = TopologyConfig.load(args.config)
    receiver = Receiver(
        topology.receiver,
        scheme=topology.scheme,
        timeout_s=topology.timeout_s,
        check_consistency=args.integrity or topology.check_consistency,
        events=_print_event,
    )
    receiver.start()
    _print_event({"event": "receiver-started", "listen": list(receiver.address),
                  "scheme": topology.scheme})
    _run_until_interrupt()
    receiver.stop()
    return 0


# ---------------------------------------------------------------------------
# experiments and demo
# ---------------------------------------------------------------------------

def cmd_experiment(args) -> int:
    if args.config:
        config = experiment.ExperimentConfig.load(args.config)
    else:
        config = experiment.ExperimentConfig()
    results = experiment.run_all(config)
    written = experiment.emit_results(results, args.out)
    for path in written:
        print(f"wrote {path}")
    print()
    print(experiment.render_summary(results))
    return 0


def cmd_demo(args) -> int:
    topology = TopologyConfig.load(args.topology) if args.topology else None
    bind = _parse_bind(args.bind or os.environ.get("GRIDSHARE_BIND", "127.0.0.1:8765"))
    rng = random.Random(args.seed) if args.seed is not None else None
    ui_dir = args.ui if args.ui else None
    control.run_demo(topology, bind=bind, ui_dir=ui_dir, rng=rng)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridshare",
        description="Two-layer secret sharing over a 3x3 operator/relay grid.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run the exhaustive recovery and secrecy oracles")
    p.add_argument("--symbols", type=int, default=1,
                   help="message width in GF(4) symbols for the recovery oracle")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("encode", help="split a file into 9 share files")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, help="deterministic keys (testing only)")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="recover a file from available share files")
    p.add_argument("--in-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--integrity", action="store_true",
                   help="cross-check every decodable submatrix")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("send", help="send a message through the uplink agents")
    p.add_argument("--config", required=True, help="topology JSON file")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--message", help="literal text message")
    group.add_argument("--file", help="read the message from a file")
    p.add_argument("--scheme", choices=SCHEMES, default=None)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_send)

    p = sub.add_parser("uplink", help="run one uplink agent (operator column)")
    p.add_argument("--config", required=True)
    p.add_argument("--index", type=int, required=True, choices=(0, 1, 2))
    p.add_argument("--control", type=int, help="TCP port for attack toggles")
    p.add_argument("--mute", action="store_true", help="start with operator DoS active")
    p.set_defaults(func=cmd_uplink)

    p = sub.add_parser("relay", help="run one relay (forwarding row)")
    p.add_argument("--config", required=True)
    p.add_argument("--index", type=int, required=True, choices=(0, 1, 2))
    p.add_argument("--control", type=int, help="TCP port for attack toggles")
    p.add_argument("--drop", action="store_true", help="start with relay DoS active")
    p.add_argument("--capture", help="write an eavesdrop capture file on exit")
    p.set_defaults(func=cmd_relay)

    p = sub.add_parser("recv", help="run the receiver")
    p.add_argument("--config", required=True)
    p.add_argument("--integrity", action="store_true")
    p.set_defaults(func=cmd_recv)

    p = sub.add_parser("experiment", help="run the comparison experiments")
    p.add_argument("--config", help="experiment JSON config (defaults if omitted)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("demo", help="start the live testbed and control plane")
    p.add_argument("--topology", help="topology JSON file (loopback default)")
    p.add_argument("--bind", help="host:port (or GRIDSHARE_BIND env var)")
    p.add_argument("--ui", help="serve a dashboard build from this directory")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_demo)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
