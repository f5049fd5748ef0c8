from gdpc_shared.utils.formatters import Fmt
from gdpc_shared.utils.rng import make_rng, splitmix64

__all__ = ["Fmt", "make_rng", "splitmix64"]
