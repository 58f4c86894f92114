"""Behaviour specs, the handler catalog, and manifest parsing.

Agents do not hard-code their behaviour set; they load it from manifest
files, one per runlevel. A manifest line binds a named handler from the
compiled-in catalog:

    behaviour <kind>[:<period-ms>] <name> handler=<symbol> [key=value]... level=<0|1|3|5>

kinds: one-shot, cyclic, ticker (period required), fsm (a cyclic whose
handler keeps a state machine in its scratch store). `#` starts a
comment. The level key is the activation level: nothing runs below
runlevel 3, activation-level <= 1 runs at 3, everything runs at 5.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .mailbox import MessageTemplate

KINDS = ("one-shot", "cyclic", "ticker", "fsm")
ACTIVATION_LEVELS = (0, 1, 3, 5)


class ManifestError(Exception):
    pass


class CatalogError(Exception):
    pass


# handler symbol -> (callable, interest template or None)
_CATALOG: dict[str, tuple[object, MessageTemplate | None]] = {}


def behaviour_handler(name: str, interest: MessageTemplate | None = None):
    """Register a behaviour handler under a catalog symbol.

    The handler runs once per scheduler round as fn(agent, instance).
    `interest` declares which REQUESTs the behaviour consumes, so the
    agent can answer NOT-UNDERSTOOD for requests nobody will handle.
    """
    def deco(fn):
        if name in _CATALOG:
            raise CatalogError(f"handler {name!r} already registered")
        _CATALOG[name] = (fn, interest)
        return fn
    return deco


# Modules contributing handlers; imported on first unresolved lookup so
# manifests can name any shipped behaviour without the caller importing
# its module first.
_PROVIDER_MODULES = ("agentmesh.runtime.agent", "agentmesh.runtime.node",
                     "agentmesh.bridge", "agentmesh.nids.expert",
                     "agentmesh.bench.driver")


def _load_providers():
    import importlib
    import logging
    for mod in _PROVIDER_MODULES:
        try:
            importlib.import_module(mod)
        except ImportError as exc:
            logging.getLogger("agentmesh.behaviour").warning(
                "handler provider %s unavailable: %s", mod, exc)


def catalog_lookup(name: str):
    if name not in _CATALOG:
        _load_providers()
    try:
        return _CATALOG[name]
    except KeyError:
        raise CatalogError(f"unknown handler symbol {name!r}") from None


def catalog_names() -> list[str]:
    _load_providers()
    return sorted(_CATALOG)


@dataclass(frozen=True)
class BehaviourSpec:
    kind: str
    name: str
    handler: str
    activation_level: int
    period_ms: int | None = None
    params: tuple[tuple[str, str], ...] = ()

    def param(self, key: str, default: str = "") -> str:
        for k, v in self.params:
            if k == key:
                return v
        return default


def parse_manifest(text: str, source: str = "<manifest>") -> list[BehaviourSpec]:
    specs: list[BehaviourSpec] = []
    names: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}:{lineno}"
        words = line.split()
        if words[0] != "behaviour" or len(words) < 3:
            raise ManifestError(f"{where}: expected 'behaviour <kind> <name> ...'")
        kind_word, name = words[1], words[2]
        kind, sep, period_word = kind_word.partition(":")
        if kind not in KINDS:
            raise ManifestError(f"{where}: unknown kind {kind!r}")
        period_ms = None
        if sep:
            if kind != "ticker":
                raise ManifestError(f"{where}: only ticker takes a period")
            try:
                period_ms = int(period_word)
            except ValueError:
                raise ManifestError(f"{where}: bad period {period_word!r}") from None
            if period_ms <= 0:
                raise ManifestError(f"{where}: period must be positive")
        elif kind == "ticker":
            raise ManifestError(f"{where}: ticker needs a :<period-ms>")
        if name in names:
            raise ManifestError(f"{where}: duplicate behaviour name {name!r}")
        names.add(name)

        handler = None
        level = None
        params: list[tuple[str, str]] = []
        for word in words[3:]:
            key, sep2, value = word.partition("=")
            if not sep2:
                raise ManifestError(f"{where}: expected key=value, got {word!r}")
            if key == "handler":
                handler = value
            elif key == "level":
                try:
                    level = int(value)
                except ValueError:
                    raise ManifestError(f"{where}: bad level {value!r}") from None
                if level not in ACTIVATION_LEVELS:
                    raise ManifestError(
                        f"{where}: level must be one of 0/1/3/5, got {level}")
            else:
                params.append((key, value))
        if handler is None:
            raise ManifestError(f"{where}: missing handler=<symbol>")
        if level is None:
            raise ManifestError(f"{where}: missing level=<0|1|3|5>")
        try:
            catalog_lookup(handler)  # unknown symbol is a load-time error
        except CatalogError as exc:
            raise ManifestError(f"{where}: {exc}") from None
        specs.append(BehaviourSpec(kind, name, handler, level, period_ms,
                                   tuple(params)))
    return specs


@dataclass
class BehaviourInstance:
    spec: BehaviourSpec
    loaded_at_level: int
    state: str = "loaded"  # loaded | active | blocked | done
    scratch: dict = field(default_factory=dict)
    _blocked_version: int | None = None
    _deadline: float | None = None

    def __post_init__(self):
        fn, interest = catalog_lookup(self.spec.handler)
        self._fn = fn
        self.interest = interest
        if self.spec.kind == "ticker":
            self._deadline = time.monotonic()  # first tick fires immediately

    # handlers call these -------------------------------------------------
    def block(self, mailbox_version: int):
        """Park until new mail arrives (version moves past the given one)."""
        self.state = "blocked"
        self._blocked_version = mailbox_version

    def finish(self):
        self.state = "done"

    # scheduler side -------------------------------------------------------
    def ready(self, now: float, mailbox_version: int) -> bool:
        if self.state == "done":
            return False
        if self.spec.kind == "ticker":
            return self._deadline is not None and now >= self._deadline
        if self.state == "blocked":
            if self._blocked_version is not None \
                    and mailbox_version > self._blocked_version:
                self.state = "active"
                self._blocked_version = None
                return True
            return False
        return True

    def deadline(self) -> float | None:
        if self.spec.kind == "ticker" and self.state != "done":
            return self._deadline
        return None

    def step(self, agent):
        self.state = "active"
        self._fn(agent, self)
        if self.spec.kind == "one-shot" and self.state != "done":
            self.state = "done"
        if self.spec.kind == "ticker" and self.state != "done":
            self._deadline = time.monotonic() + self.spec.period_ms / 1000.0

    def claims(self, msg) -> bool:
        return self.interest is not None and self.interest.matches(msg)
