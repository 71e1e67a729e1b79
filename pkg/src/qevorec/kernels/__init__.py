"""Hot kernels, dispatched to numba or numpy according to ``QEVOREC_BACKEND``."""
from .._accel import BACKEND

if BACKEND == "numba":
    from ._nb import discord_batch, eigh_batch, mf_gradients
else:
    from ._np import discord_batch, eigh_batch, mf_gradients

__all__ = ["BACKEND", "discord_batch", "eigh_batch", "mf_gradients"]
