"""LAN peer-to-peer file transfer.

Receivers discover senders with a UDP probe, ask permission, and download
a checksummed file index over a code-gated local HTTP server. Includes a
benchmark harness, a one-shot CLI, and a loopback control daemon for the
browser panel.
"""

__version__ = "0.1.0"
