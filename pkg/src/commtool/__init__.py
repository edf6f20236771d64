"""commtool: organizational bulk-email evaluation.

Send tracked newsletter variants to a recipient panel, reconstruct reading
behavior from browser interaction events, and report awareness, relevance,
cost, and reputation metrics through dashboards, share links, and a CLI.
"""

__version__ = "0.1.0"
