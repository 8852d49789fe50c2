"""Desk-scale numerics for one-shot typicality, tilted subspaces, and MAC decoders."""

from . import audits, hyptest, mac, qla, report, tilting, typicality

__all__ = ["audits", "hyptest", "mac", "qla", "report", "tilting", "typicality"]
