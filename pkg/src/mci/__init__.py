"""mci: bi-temporal change interpretation toolkit.

Pixel-level change detection and semantic change captioning over image
pairs, plus an LLM-orchestrated analysis agent and HTTP gateway.
"""

__version__ = "0.1.0"
