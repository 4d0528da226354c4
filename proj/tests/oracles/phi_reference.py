"""Independent re-application of docs/phi_grammar.md to the fixture corpus.

Uses Python's re module and the MT19937-64 oracle; shares no code with the
C++ parser. Exits non-zero if any recorded expectation disagrees.
"""
import json
import re
import sys
from pathlib import Path

from mt64 import MT64

KEYWORD = re.compile(r"\bACTION[ \t]*:[ \t]*([A-Za-z_][A-Za-z0-9_-]*|[0-9]+)", re.IGNORECASE)
JSON_FIELD = re.compile(r'"action"[ \t\r\n]*:[ \t\r\n]*(?:"([^"\\]*)"|(-?[0-9]+)(?![0-9.eE]))')
SPACE = " \t\n\r\f\v"


def index(digits, k):
    if not digits or len(digits) > 9 or not all(c in "0123456789" for c in digits):
        return None
    v = int(digits)
    return v if v < k else None


def token(tok, space):
    if tok and all(c in "0123456789" for c in tok):
        return index(tok, space["k"])
    for i, label in enumerate(space["labels"]):
        if label.lower() == tok.lower():
            return i
    return None


def grammar(text, space, name):
    if name == "strict_integer":
        return index(text.strip(SPACE), space["k"])
    pattern = KEYWORD if name == "labeled_keyword" else JSON_FIELD
    matches = list(pattern.finditer(text))
    if not matches:
        return None
    m = matches[-1]
    if name == "labeled_keyword":
        return token(m.group(1), space)
    if m.group(1) is not None:
        return token(m.group(1), space)
    if m.group(2).startswith("-"):
        return None
    return index(m.group(2), space["k"])


def apply(case, space):
    a = grammar(case["text"], space, case["grammar"])
    if a is not None:
        return {"action": a, "outcome": "parsed"}
    if case["fallback"] == "error":
        return {"outcome": "error"}
    if case["fallback"] == "noop":
        return {"action": space["null_action"], "outcome": "fell_back_noop"}
    return {"action": MT64(case["seed"]).below(space["k"]), "outcome": "fell_back_random"}


def main():
    path = Path(__file__).resolve().parents[2] / "fixtures" / "phi" / "corpus.json"
    corpus = json.loads(path.read_text())
    bad = 0
    combos = set()
    for case in corpus["cases"]:
        got = apply(case, corpus["spaces"][case["space"]])
        combos.add((case["class"], case["grammar"], case["fallback"]))
        if got != case["expect"]:
            bad += 1
            print(f"case {case['id']}: expected {case['expect']} reference gives {got}")
    print(f"{len(corpus['cases'])} cases, {len(combos)} class/grammar/fallback combinations, {bad} disagreements")
    sys.exit(1 if bad or len(combos) != 27 else 0)


if __name__ == "__main__":
    main()
