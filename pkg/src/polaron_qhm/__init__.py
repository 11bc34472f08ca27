"""polaron-qhm - steady-state thermodynamics of a strongly coupled quantum heat machine."""

from .version import __version__

# Copyright (c) 2025 AMD
