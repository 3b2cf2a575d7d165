"""First-sentence quote extraction shared by response parsing and scoring.

Curly double quotes are folded to ``"`` first. The first sentence runs up to
the first ``.``, ``!`` or ``?`` outside quotes; the quoted span is the
content of the first matched ``"..."`` pair inside it.
"""
import re

_CURLY = str.maketrans({"“": '"', "”": '"', "„": '"', "‟": '"', "″": '"'})
_QUOTED = re.compile(r'"[^"]*"')
_TERMINATORS = ".!?"


def normalize_quotes(text: str) -> str:
    # one-to-one character mapping, so indices into the result index the input
    return text.translate(_CURLY)


def first_sentence_end(text: str) -> int:
    in_quote = False
    for i, ch in enumerate(normalize_quotes(text)):
        if ch == '"':
            in_quote = not in_quote
        elif not in_quote and ch in _TERMINATORS:
            return i + 1
    return len(text)


def first_quote_span(text: str):
    """(start, end) of the first quoted content in the first sentence, or None."""
    norm = normalize_quotes(text)
    end = first_sentence_end(norm)
    open_at = norm.find('"', 0, end)
    if open_at < 0:
        return None
    close_at = norm.find('"', open_at + 1, end)
    if close_at < 0:
        return None
    return open_at + 1, close_at


def extract_first_quote(text: str) -> str:
    span = first_quote_span(text)
    return "" if span is None else text[span[0]:span[1]]


def strip_quoted(text: str) -> str:
    return _QUOTED.sub(" ", normalize_quotes(text))
