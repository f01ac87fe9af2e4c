"""Versioned prompt and instruction assets.

Every prompt template lives here as a text file whose stem is its id; the
id is recorded in transcripts so a response can always be traced back to
the exact wording that produced it.
"""

from importlib import resources


def load_asset(name: str) -> str:
    return resources.files(__package__).joinpath(name).read_text(encoding="utf-8")


def asset_id(name: str) -> str:
    return name.rsplit(".", 1)[0]
