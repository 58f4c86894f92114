"""agentmesh: rule-based multi-agent middleware.

Every agent may carry its own forward-chaining rule engine, driven
exclusively through queued messages so that reasoning never blocks the
agent's communication. Ships with a network-intrusion-detection demo,
a latency benchmark and an HTTP/WebSocket operator gateway.
"""

__version__ = "0.1.0"
