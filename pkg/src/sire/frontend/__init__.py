"""Lexer, parser, program tree and pretty-printer."""

from __future__ import annotations

from . import ast, printer
from .lexer import Kind, Token, tokenize
from .parser import parse, parse_source

__all__ = ["ast", "printer", "Kind", "Token", "tokenize", "parse", "parse_source"]
