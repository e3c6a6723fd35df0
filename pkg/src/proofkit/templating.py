"""Prompt template loading.

Templates ship as package data, one file per template id, and are rendered
with string.Template so braces in embedded code never collide with
placeholder syntax.
"""

from __future__ import annotations

import string
from importlib import resources


def template_text(template_id: str) -> str:
    path = resources.files("proofkit").joinpath("templates", f"{template_id}.txt")
    return path.read_text()


def render_template(template_id: str, **fields: str) -> str:
    return string.Template(template_text(template_id)).substitute(**fields)
