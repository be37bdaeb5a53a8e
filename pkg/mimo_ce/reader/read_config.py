"""
Reader for experiment configuration files.

A configuration file holds one ``key = value`` pair per line; blank lines
and lines starting with ``#`` or ``$`` are skipped. Keys follow the dotted
naming of ``mimo_ce.config.CONFIG_KEYS``, for example::

    # desk run with a denser interferer field
    array.m = 6
    array.phi = pi/3
    noise.snr_db = 0, 10, 20
    ppp.lambda = 0.1, 0.5
    seed = 7

"""

import logging
import os

from mimo_ce.config import CONFIG_KEYS, InvalidConfig, apply_settings

logger = logging.getLogger(__name__)

COMMENT_MARKS = ("#", "$")


class ConfigFile:
    """
    Holds the raw ``key: value`` pairs of a configuration file.

    Values are kept as strings; parsing and validation happen when the
    content is applied to an ``ExperimentConfig`` with ``apply_to``.
    """

    def __init__(self, path):
        self.name = os.path.basename(path)
        self.content = self.read_config_file(path)

    @property
    def keys(self):
        return list(self.content.keys())

    def apply_to(self, config):
        return apply_settings(config, self.content)

    @staticmethod
    def process_line(line):
        """Split a line into a stripped key and value."""
        line = line.replace('"', "").strip()
        if "=" not in line:
            raise InvalidConfig(f"Line '{line}' is not a 'key = value' pair.")
        name, value = line.split("=", 1)
        return name.strip().lower(), value.strip()

    def process_file(self, file):
        """Collect pairs, rejecting unknown and repeated keys."""
        content = {}
        for number, line in enumerate(file, start=1):
            line = line.strip()

            if line == "" or line[0] in COMMENT_MARKS:
                continue

            try:
                key, value = self.process_line(line)
            except InvalidConfig as err:
                raise InvalidConfig(f"{self.name}:{number}: {err}") from None

            if key not in CONFIG_KEYS:
                raise InvalidConfig(f"{self.name}:{number}: unknown key '{key}'.")

            if key in content:
                raise InvalidConfig(f"{self.name}:{number}: key '{key}' repeated.")

            content[key] = value

        return content

    def read_config_file(self, path):
        """Open the file and trigger processing."""
        if not os.path.isfile(path):
            raise FileNotFoundError(f"Configuration file '{path}' does not exist!")
        with open(path, "r") as f:
            content = self.process_file(f)
        logger.debug("Read %d settings from '%s'.", len(content), path)
        return content


def read_config(path, base):
    """Apply the configuration file at ``path`` on top of the ``base`` config."""
    return ConfigFile(path).apply_to(base)
