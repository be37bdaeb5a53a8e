"""Channel estimation toolkit for massive MIMO-OFDM uplink simulations."""

import logging

logging.getLogger(__name__).addHandler(logging.NullHandler())


class MimoCeError(Exception):
    """Base class for all errors raised by the package."""
