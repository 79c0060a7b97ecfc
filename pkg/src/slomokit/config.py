"""Layered configuration: env vars override CLI flags override the config file.

The config file is INI-style::

    [media]
    decoder_cmd = ffmpeg -i {input} -f yuv4mpegpipe -pix_fmt yuv420p -
    encoder_cmd = ffmpeg -f yuv4mpegpipe -i - -f mp4 {output}
    range = limited

    [backend]
    name = classical
    command =

    [service]
    host = 127.0.0.1
    port = 8650
    workers = 2
    upload_limit_bytes = 268435456

Environment variables use the ``SLOMOKIT_<SECTION>_<KEY>`` pattern
(``SLOMOKIT_MEDIA_DECODER_CMD`` ...); ``SLOMOKIT_DECODER`` is a documented
shorthand for the decoder command.
"""

from __future__ import annotations

import configparser
import os
from pathlib import Path

ENV_PREFIX = "SLOMOKIT"
DECODER_ENV = "SLOMOKIT_DECODER"


def load_config_file(path=None) -> configparser.ConfigParser:
    parser = configparser.ConfigParser()
    if path is None:
        path = os.environ.get(f"{ENV_PREFIX}_CONFIG", "slomokit.ini")
    path = Path(path)
    if path.exists():
        parser.read(path)
    return parser


def resolve(config: configparser.ConfigParser, section: str, key: str,
            flag_value=None, default=None):
    """Precedence: environment > flag > config file > default."""
    env_key = f"{ENV_PREFIX}_{section.upper()}_{key.upper()}"
    if env_key in os.environ:
        return os.environ[env_key]
    if section == "media" and key == "decoder_cmd" and DECODER_ENV in os.environ:
        return os.environ[DECODER_ENV]
    if flag_value is not None:
        return flag_value
    if config.has_option(section, key):
        return config.get(section, key)
    return default
