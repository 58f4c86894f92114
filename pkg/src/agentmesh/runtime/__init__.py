"""Agent runtime: mailboxes, behaviour scheduling, runlevels, nodes."""

from .behaviour import (BehaviourInstance, BehaviourSpec, CatalogError,
                        ManifestError, behaviour_handler, catalog_names,
                        parse_manifest)
from .mailbox import Mailbox, MessageTemplate
from .agent import Agent, LifecycleError
from .node import Node

__all__ = [
    "Agent", "BehaviourInstance", "BehaviourSpec", "CatalogError",
    "LifecycleError", "Mailbox", "ManifestError", "MessageTemplate",
    "Node", "behaviour_handler", "catalog_names", "parse_manifest",
]
