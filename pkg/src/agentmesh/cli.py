"""Process entry points: launch nodes, run the benchmark, run the demo.

Roles wrap manifest boilerplate: `--role board` and friends generate a
manifest for the common single-purpose agents, while `--manifest-dir`
takes over completely for anything custom. One node per process; the
node shuts down and deregisters on SIGINT/SIGTERM.
"""

from __future__ import annotations

import logging
import os
import shlex
import signal
import sys
import tempfile
import threading
import time

import click

from . import __version__
from .runtime.agent import LifecycleError
from .runtime.behaviour import ManifestError
from .runtime.node import Node, NodeError

_LAUNCH_ERRORS = (NodeError, LifecycleError, ManifestError)

log = logging.getLogger("agentmesh.cli")

ROLES = ("platform", "agent", "board", "watchdog", "expert", "analyzer")
_LEVELS = "\n".join(f"level.{lvl:02d}.bf" for lvl in (0, 1, 3, 5))


def _setup_logging():
    level = os.environ.get("AGENTMESH_LOG", "INFO").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s %(levelname)-7s %(name)s: %(message)s")


def _parse_endpoint(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise click.BadParameter(f"expected host:port, got {text!r}")
    return host, int(port)


def _role_manifest(role: str, name: str, dewey: str,
                   rules: str | None) -> str:
    """Level-5 manifest lines for the canned roles."""
    if role == "board":
        return ("behaviour cyclic serve handler=ticket-board-server "
                "journal=board.journal level=5\n")
    if role == "watchdog":
        return ("behaviour ticker:500 scan handler=watchdog-converter "
                "board=board level=5\n")
    if role == "expert":
        lines = ["behaviour cyclic worker handler=engine-worker level=5",
                 f"behaviour ticker:250 cycle handler=ticket-requester "
                 f"board=board dewey={dewey} level=5"]
        if rules:
            lines[-1] += f" signatures={rules}"
        return "\n".join(lines) + "\n"
    if role == "agent":
        line = "behaviour cyclic worker handler=engine-worker"
        if rules:
            line += f" rules={rules}"
        return line + " level=5\n"
    return ""


def _write_manifests(level5: str) -> str:
    d = tempfile.mkdtemp(prefix="agentmesh-manifest-")
    for lvl in (0, 3):
        open(os.path.join(d, f"level.{lvl:02d}.bf"), "w").close()
    with open(os.path.join(d, "level.01.bf"), "w") as fh:
        fh.write("behaviour cyclic presence handler=presence-responder "
                 "level=1\n")
    with open(os.path.join(d, "level.05.bf"), "w") as fh:
        fh.write(level5)
    return d


@click.group()
@click.version_option(__version__, prog_name="agentmesh")
def main():
    """Rule-based multi-agent middleware."""
    _setup_logging()


@main.group()
def node():
    """Node lifecycle."""


@node.command("launch")
@click.option("--name", required=True, help="Agent (and node) name.")
@click.option("--platform", "platform_ep", default=None, metavar="HOST:PORT",
              help="Join this platform; omit to be the platform node.")
@click.option("--role", type=click.Choice(ROLES), default="agent",
              show_default=True)
@click.option("--level", type=int, default=5, show_default=True,
              help="Initial runlevel.")
@click.option("--manifest-dir", type=click.Path(exists=True, file_okay=False),
              default=None, help="Use these manifests instead of the role's.")
@click.option("--resources", type=click.Path(file_okay=False), default=None,
              help="Resource root (captures, fact files, journals).")
@click.option("--gateway", "gateway_ep", default=None, metavar="HOST:PORT",
              help="Serve the console gateway from this node.")
@click.option("--rules", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Preload this rules file into the engine.")
@click.option("--dewey", default="*", show_default=True,
              help="Capture-class filter for the expert role.")
@click.option("--listen", default="127.0.0.1:0", metavar="HOST:PORT",
              show_default=True, help="Wire endpoint to bind.")
def node_launch(name, platform_ep, role, level, manifest_dir, resources,
                gateway_ep, rules, dewey, listen):
    """Launch one node hosting one configured agent."""
    host, port = _parse_endpoint(listen)
    platform = _parse_endpoint(platform_ep) if platform_ep else None
    if role == "platform" and platform is not None:
        raise click.UsageError("--role platform cannot also join a platform")
    if role != "platform" and platform is None:
        raise click.UsageError(f"--role {role} needs --platform")
    if resources:
        os.makedirs(resources, exist_ok=True)

    n = Node(name, host=host, port=port, platform=platform,
             resources_dir=resources)
    try:
        n.start()
    except OSError as exc:
        raise click.ClickException(f"cannot bind {listen}: {exc}")

    gw = None
    try:
        if role != "platform":
            mdir = manifest_dir or _write_manifests(
                _role_manifest(role, name, dewey, rules))
            n.spawn_agent(name, mdir, level=level)
        if gateway_ep:
            from .gateway import Gateway
            ghost, gport = _parse_endpoint(gateway_ep)
            gw = Gateway(n, ghost, gport)
            gw.start()
            click.echo(f"gateway on http://{ghost}:{gw.port}")
        click.echo(f"node {name} up at {n.endpoint[0]}:{n.endpoint[1]} "
                   f"({role})")
        _wait_for_shutdown()
    except _LAUNCH_ERRORS as exc:
        raise click.ClickException(str(exc))
    finally:
        if gw is not None:
            gw.close()
        n.close()


def _wait_for_shutdown():
    stop = threading.Event()
    for sig in (signal.SIGINT, signal.SIGTERM):
        signal.signal(sig, lambda *_: stop.set())
    stop.wait()
    click.echo("shutting down")


@main.group()
def bench():
    """Latency experiment."""


@bench.command("run")
@click.option("--target", required=True, help="Agent to measure.")
@click.option("--platform", "platform_ep", required=True, metavar="HOST:PORT")
@click.option("--mode", type=click.Choice(["nonblocking", "blocking"]),
              default="nonblocking", show_default=True,
              help="Label for the report; the target must match.")
@click.option("--out", type=click.Path(dir_okay=False), default="report.csv",
              show_default=True)
@click.option("--name", default="analyzer", show_default=True,
              help="Name to register the analyzer under.")
def bench_run(target, platform_ep, mode, out, name):
    """Send the 40-message schedule at TARGET and write the CSV report."""
    from .acl.model import AgentId
    from .bench import run_experiment, standard_workloads

    n = Node(f"{name}-node", platform=_parse_endpoint(platform_ep))
    try:
        n.start()
        analyzer = n.spawn_agent(name, _write_manifests(""), level=5)
        click.echo("calibrating workloads on this host...")
        workloads = standard_workloads()
        for w in workloads:
            click.echo(f"  target {w.target_ms:6.0f} ms -> chain of "
                       f"{w.nodes} nodes ({w.measured_ms:.0f} ms here)")
        report = run_experiment(
            analyzer, AgentId(target, *n.platform_endpoint),
            workloads=workloads, mode=mode)
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(report.to_csv())
        click.echo(report.summary())
        click.echo(f"wrote {out}")
    except _LAUNCH_ERRORS as exc:
        raise click.ClickException(str(exc))
    finally:
        n.close()


@main.command("demo")
@click.option("--dir", "workdir", type=click.Path(file_okay=False),
              default=None, help="Working directory (default: temp).")
@click.option("--gateway", "gateway_ep", default=None, metavar="HOST:PORT",
              help="Also serve the console gateway.")
@click.option("--duration", type=float, default=0.0,
              help="Exit after this many seconds (0 = run until Ctrl-C).")
def demo(workdir, gateway_ep, duration):
    """Self-contained intrusion-detection demo on one node.

    Synthesizes three captures (an SSDP flood, quiet traffic, and a
    probe mix), then runs board, watchdog, and expert agents until the
    tickets are closed. Watch GET /tickets or the console if a gateway
    is enabled.
    """
    from .nids.synth import (benign_frames, build_pcap, flood_frames,
                             probe_frames)

    root = workdir or tempfile.mkdtemp(prefix="agentmesh-demo-")
    os.makedirs(root, exist_ok=True)
    for fname, frames in (("flood.pcap", flood_frames()),
                          ("benign.pcap", benign_frames()),
                          ("probe.pcap", probe_frames())):
        with open(os.path.join(root, fname), "wb") as fh:
            fh.write(build_pcap(frames))

    n = Node("demo-platform", resources_dir=root)
    gw = None
    try:
        n.start()
        n.spawn_agent("board", _write_manifests(
            _role_manifest("board", "board", "*", None)), level=5)
        n.spawn_agent("watchdog1", _write_manifests(
            _role_manifest("watchdog", "watchdog1", "*", None)), level=5)
        n.spawn_agent("expert1", _write_manifests(
            _role_manifest("expert", "expert1", "*", None)), level=5)
        if gateway_ep:
            from .gateway import Gateway
            ghost, gport = _parse_endpoint(gateway_ep)
            gw = Gateway(n, ghost, gport)
            gw.start()
            click.echo(f"gateway on http://{ghost}:{gw.port}")
        click.echo(f"demo running, captures in {root}")
        deadline = time.monotonic() + duration if duration else None
        board_agent = n.agents["board"]
        shown: dict[str, str] = {}
        while deadline is None or time.monotonic() < deadline:
            time.sleep(0.5)
            board = getattr(board_agent, "board", None)
            if board is None:
                continue
            for t in board.tickets():
                state = f"{t.statefrom}/{t.stateuntil}"
                if shown.get(t.tid) != state:
                    shown[t.tid] = state
                    click.echo(f"  ticket {t.tid} "
                               f"{os.path.basename(t.datastore):24} "
                               f"{t.deweycode:12} -> {t.stateuntil}")
            if deadline is None and board.tickets() and all(
                    t.statefrom == "closed" for t in board.tickets()):
                click.echo("all tickets closed; Ctrl-C to stop"
                           " (watchdog keeps scanning)")
                deadline = float("inf")
    except KeyboardInterrupt:
        pass
    finally:
        if gw is not None:
            gw.close()
        n.close()


if __name__ == "__main__":
    main()
