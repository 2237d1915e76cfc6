"""Fundamental domains and presentations of Hilbert modular groups PSL2(O_K), K = Q(sqrt k)."""

from .ring import FieldCtx, KNum, QuadInt, make_ctx

__all__ = ["FieldCtx", "KNum", "QuadInt", "make_ctx"]
