"""Rule-based question generation from bracketed constituency parses.

Takes Penn-style parse trees of declarative sentences and produces QA
candidates by questioning the subject NP, the first object NP, and
temporal/locative PP complements. The full rule inventory (WH choice,
inversion vs do-support, filtering, ranking score) is documented in
``docs/qgen_rules.md``; gazetteers ship under ``artqa/resources``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

_LABEL_RE = re.compile(r"^[A-Za-z0-9$\-.,:;'`?!#*+&/%@^=~_]+$")

VERB_TAGS = frozenset({"VB", "VBD", "VBG", "VBN", "VBP", "VBZ", "MD"})
FINITE_TAGS = frozenset({"VBD", "VBZ", "VBP", "MD"})
NOMINAL_TAGS = ("NNP", "NNPS", "NN", "NNS", "PRP", "PRP$", "CD")
BE_FORMS = frozenset({"am", "is", "are", "was", "were"})
HAVE_FORMS = frozenset({"has", "have", "had"})
DO_FORMS = frozenset({"do", "does", "did"})
MONTHS = frozenset(
    "january february march april may june july august september october november december".split()
)
TEMPORAL_NOUNS = frozenset(
    "year years century centuries decade decades summer winter spring autumn morning "
    "afternoon evening night youth childhood".split()
)
LOCATIVE_PREPS = frozenset(
    "in at on to near inside outside under above behind beside between within along across around beneath".split()
)
TEMPORAL_PREPS = frozenset("in on at during after before by around since until throughout".split())
# prepositions that are temporal regardless of their object's head
TEMPORAL_ONLY_PREPS = frozenset("during since until throughout after".split())

_DO_FORM_FOR_TAG = {"VBD": "did", "VBZ": "does", "VBP": "do"}


class ParseError(ValueError):
    """Unbalanced, empty, or ill-labeled bracketed parse."""


@dataclass(frozen=True)
class ParseTree:
    """Internal node (children non-empty) or preterminal (token set)."""

    label: str
    children: tuple["ParseTree", ...] = ()
    token: str | None = None

    def __post_init__(self) -> None:
        if (self.token is None) == (len(self.children) == 0):
            raise ParseError(f"node {self.label!r} must hold either children or a token")
        if not _LABEL_RE.match(self.label):
            raise ParseError(f"illegal constituent label {self.label!r}")

    @property
    def is_preterminal(self) -> bool:
        return self.token is not None

    def tokens(self) -> list[str]:
        if self.token is not None:
            return [self.token]
        out: list[str] = []
        for c in self.children:
            out.extend(c.tokens())
        return out

    def text(self) -> str:
        return " ".join(self.tokens())


def parse_bracketed(text: str) -> ParseTree:
    """Parse a single Penn-style bracketed tree; whitespace is insignificant."""
    pos = 0
    n = len(text)

    def skip_ws() -> None:
        nonlocal pos
        while pos < n and text[pos].isspace():
            pos += 1

    def read_atom() -> str:
        nonlocal pos
        start = pos
        while pos < n and not text[pos].isspace() and text[pos] not in "()":
            pos += 1
        if pos == start:
            raise ParseError(f"expected a label or token at offset {start}")
        return text[start:pos]

    def read_node() -> ParseTree:
        nonlocal pos
        skip_ws()
        if pos >= n or text[pos] != "(":
            raise ParseError(f"expected '(' at offset {pos}")
        pos += 1
        skip_ws()
        label = read_atom()
        children: list[ParseTree] = []
        token: str | None = None
        while True:
            skip_ws()
            if pos >= n:
                raise ParseError("unbalanced brackets: unexpected end of input")
            if text[pos] == ")":
                pos += 1
                break
            if text[pos] == "(":
                if token is not None:
                    raise ParseError(f"node {label!r} mixes a token with children")
                children.append(read_node())
            else:
                atom = read_atom()
                if children or token is not None:
                    raise ParseError(f"preterminal {label!r} holds more than one token")
                token = atom
        if token is None and not children:
            raise ParseError(f"empty constituent {label!r}")
        return ParseTree(label=label, children=tuple(children), token=token)

    tree = read_node()
    skip_ws()
    if pos != n:
        raise ParseError(f"trailing content after the root tree at offset {pos}")
    return tree


def serialize(tree: ParseTree) -> str:
    if tree.token is not None:
        return f"({tree.label} {tree.token})"
    inner = " ".join(serialize(c) for c in tree.children)
    return f"({tree.label} {inner})"


@lru_cache(maxsize=4)
def _gazetteer(name: str) -> frozenset[str]:
    text = resources.files("artqa.resources").joinpath(name).read_text("utf-8")
    return frozenset(w.strip().lower() for w in text.splitlines() if w.strip() and not w.startswith("#"))


def person_names() -> frozenset[str]:
    return _gazetteer("person_names.txt")


def place_names() -> frozenset[str]:
    return _gazetteer("place_names.txt")


@lru_cache(maxsize=1)
def _verb_lemmas() -> dict[str, str]:
    text = resources.files("artqa.resources").joinpath("verb_lemmas.txt").read_text("utf-8")
    out: dict[str, str] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        inflected, lemma = line.split()
        out[inflected] = lemma
    return out


def verb_base_form(token: str) -> str:
    """Base form for do-support: lemma table first, then regular stripping."""
    w = token.lower()
    table = _verb_lemmas()
    if w in table:
        return table[w]
    if w.endswith("ies") and len(w) > 4:
        return w[:-3] + "y"
    if w.endswith("es") and len(w) > 3:
        stem = w[:-2]
        if stem.endswith(("ss", "ch", "sh", "x", "z", "o")):
            return stem
        return w[:-1]
    if w.endswith("s") and len(w) > 2 and not w.endswith("ss"):
        return w[:-1]
    if w.endswith("ied") and len(w) > 4:
        return w[:-3] + "y"
    if w.endswith("ed") and len(w) > 3:
        stem = w[:-2]
        if stem.endswith(("at", "bl", "iz", "iv", "as", "us", "ov", "rv", "lv", "nc", "uc", "rg", "dg", "gu")):
            return stem + "e"
        if len(stem) >= 2 and stem[-1] == stem[-2] and stem[-1] not in "lsz":
            return stem[:-1]
        if stem.endswith("e"):  # e.g. "agreed" -> "agre" + "e"
            return stem + "e" if not stem.endswith("ee") else stem
        return stem
    return w


@dataclass(frozen=True)
class RulesConfig:
    max_candidates: int = 3
    min_question_tokens: int = 4


@dataclass(frozen=True)
class QaCandidate:
    rule_id: str
    wh: str
    question_tokens: tuple[str, ...]
    answer: str
    answer_path: str  # dotted child indices from the root
    answer_head_tag: str
    score: float

    @property
    def question(self) -> str:
        return " ".join(self.question_tokens)

    def to_dict(self) -> dict:
        return {
            "rule": self.rule_id,
            "wh": self.wh,
            "question": self.question,
            "answer": self.answer,
            "answer_path": self.answer_path,
            "score": round(self.score, 6),
        }


def _unwrap_root(tree: ParseTree) -> ParseTree | None:
    while tree.label in ("ROOT", "TOP") and len(tree.children) == 1:
        tree = tree.children[0]
    return tree if tree.label == "S" else None


def _head_preterminal(node: ParseTree) -> ParseTree:
    """Rightmost nominal preterminal, else the rightmost preterminal."""
    preterminals = [n for n in _walk(node) if n.is_preterminal]
    for tag in NOMINAL_TAGS:
        for p in reversed(preterminals):
            if p.label == tag:
                return p
    return preterminals[-1]


def _walk(node: ParseTree):
    yield node
    for c in node.children:
        yield from _walk(c)


def _is_person(np: ParseTree) -> bool:
    head = _head_preterminal(np)
    tok = (head.token or "").lower()
    if tok in person_names():
        return True
    if head.label in ("NNP", "NNPS"):
        return tok not in place_names() and tok not in MONTHS
    return False


def _subject_tokens(subject: ParseTree) -> list[str]:
    """Yield of the subject, first token lowercased unless it is a proper noun."""
    toks = subject.tokens()
    first = _first_preterminal(subject)
    if first.label not in ("NNP", "NNPS"):
        toks = [toks[0].lower()] + toks[1:]
    return toks


def _first_preterminal(node: ParseTree) -> ParseTree:
    while not node.is_preterminal:
        node = node.children[0]
    return node


def _vp_aux_split(vp: ParseTree) -> tuple[str | None, list[ParseTree]]:
    """(aux token, remaining VP children) when subject-aux inversion applies."""
    first = vp.children[0]
    if not first.is_preterminal or first.label not in VERB_TAGS:
        return None, list(vp.children)
    tok = first.token.lower()
    rest = list(vp.children[1:])
    if first.label == "MD":
        return first.token, rest
    if tok in BE_FORMS:
        return first.token, rest
    if tok in HAVE_FORMS or tok in DO_FORMS:
        if any(c.label == "VP" for c in rest):
            return first.token, rest
    return None, list(vp.children)


def _yield_excluding(nodes: list[ParseTree], excluded: ParseTree) -> list[str]:
    out: list[str] = []
    for node in nodes:
        if node is excluded:
            continue
        if node.is_preterminal:
            out.append(node.token)
        else:
            out.extend(_yield_excluding(list(node.children), excluded))
    return out


def _score(depth: int, answer_tokens: int) -> float:
    # depth penalty plus a mild prior for longer (more contentful) answers
    return -0.5 * depth + 0.1 * min(answer_tokens, 5)


def generate_qa(tree: ParseTree, config: RulesConfig | None = None) -> list[QaCandidate]:
    """All QA candidates for one declarative sentence; empty when the tree is
    not a declarative S with an NP subject and a finite VP."""
    sent = _unwrap_root(tree)
    if sent is None:
        return []
    np_idx = next(
        (i for i, c in enumerate(sent.children) if c.label == "NP"),
        None,
    )
    if np_idx is None:
        return []
    vp_idx = next(
        (i for i, c in enumerate(sent.children[np_idx + 1 :], np_idx + 1) if c.label == "VP"),
        None,
    )
    if vp_idx is None:
        return []
    subject, vp = sent.children[np_idx], sent.children[vp_idx]
    head_verb = next(
        (c for c in vp.children if c.is_preterminal and c.label in VERB_TAGS), None
    )
    if head_verb is None or head_verb.label not in FINITE_TAGS:
        return []

    # paths are relative to the given tree, so account for ROOT wrappers
    prefix = []
    node = tree
    while node is not sent:
        prefix.append(0)
        node = node.children[0]

    def path_of(*idx: int) -> str:
        return ".".join(str(i) for i in (*prefix, *idx))

    candidates: list[QaCandidate] = []
    aux, after_aux = _vp_aux_split(vp)

    # with an auxiliary, objects and PP complements sit in the inner VP
    search_vp, search_path = vp, (vp_idx,)
    if aux is not None:
        for j, c in enumerate(vp.children):
            if c.label == "VP":
                search_vp, search_path = c, (vp_idx, j)
                break

    # subject rule: WH replaces the subject, VP kept verbatim
    wh = "Who" if _is_person(subject) else "What"
    q = [wh, *vp.tokens(), "?"]
    candidates.append(
        QaCandidate(
            rule_id="subj-np",
            wh=wh.lower(),
            question_tokens=tuple(q),
            answer=subject.text(),
            answer_path=path_of(np_idx),
            answer_head_tag=_head_preterminal(subject).label,
            score=_score(1, len(subject.tokens())),
        )
    )

    def inverted_question(wh_word: str, excluded: ParseTree) -> list[str] | None:
        if aux is not None:
            rest = _yield_excluding(after_aux, excluded)
            return [wh_word, aux.lower(), *_subject_tokens(subject), *rest, "?"]
        do_form = _DO_FORM_FOR_TAG.get(head_verb.label)
        if do_form is None:
            return None
        rest = _yield_excluding(
            [c for c in vp.children if c is not head_verb], excluded
        )
        return [wh_word, do_form, *_subject_tokens(subject), verb_base_form(head_verb.token), *rest, "?"]

    # object rule: first NP directly under the (inner) VP
    for j, child in enumerate(search_vp.children):
        if child.label == "NP":
            wh = "Who" if _is_person(child) else "What"
            q_tokens = inverted_question(wh, child)
            if q_tokens is not None:
                candidates.append(
                    QaCandidate(
                        rule_id="obj-np",
                        wh=wh.lower(),
                        question_tokens=tuple(q_tokens),
                        answer=child.text(),
                        answer_path=path_of(*search_path, j),
                        answer_head_tag=_head_preterminal(child).label,
                        score=_score(len(search_path) + 1, len(child.tokens())),
                    )
                )
            break

    # PP rules: temporal -> when, locative -> where
    for j, child in enumerate(search_vp.children):
        if child.label != "PP" or not child.children:
            continue
        prep = _first_preterminal(child)
        obj = next((c for c in child.children if c.label == "NP"), None)
        if obj is None or prep.label not in ("IN", "TO"):
            continue
        head = _head_preterminal(obj)
        tok = (head.token or "").lower()
        prep_tok = prep.token.lower()
        temporal = prep_tok in TEMPORAL_ONLY_PREPS or (
            (head.label == "CD" or tok in MONTHS or tok in TEMPORAL_NOUNS)
            and prep_tok in TEMPORAL_PREPS
        )
        locative = prep_tok in LOCATIVE_PREPS and not temporal
        if temporal:
            wh = "When"
        elif locative:
            wh = "Where"
        else:
            continue
        q_tokens = inverted_question(wh, child)
        if q_tokens is None:
            continue
        candidates.append(
            QaCandidate(
                rule_id="pp-when" if temporal else "pp-where",
                wh=wh.lower(),
                question_tokens=tuple(q_tokens),
                answer=child.text(),
                answer_path=path_of(*search_path, j),
                answer_head_tag=head.label,
                score=_score(len(search_path) + 1, len(child.tokens())),
            )
        )
    return candidates


def filter_candidates(
    candidates: list[QaCandidate], config: RulesConfig | None = None
) -> list[QaCandidate]:
    """Drop pronoun answers and too-short questions, rank by score (ties by
    rule id then answer path), keep the top ``max_candidates`` per sentence."""
    config = config or RulesConfig()
    kept = [
        c
        for c in candidates
        if c.answer_head_tag not in ("PRP", "PRP$")
        and len(c.question_tokens) >= config.min_question_tokens
    ]
    kept.sort(key=lambda c: (-c.score, c.rule_id, c.answer_path))
    return kept[: config.max_candidates]


def candidates_to_qa_records(
    pairs: list[tuple[str, "QaCandidate"]], corpus, split: str = "train"
) -> list[dict]:
    """Turn generated candidates into knowledge QA record dicts. Sentence ids
    must be comment ids of the given corpus (each question's source text),
    which resolves the painting each record attaches to."""
    records = []
    for i, (sid, cand) in enumerate(pairs, 1):
        comment = corpus.comments_by_id.get(sid)
        if comment is None:
            raise KeyError(f"sentence id {sid!r} is not a comment id in the corpus")
        records.append(
            {
                "id": f"qg{i:05d}",
                "painting_id": comment.painting_id,
                "question": cand.question,
                "answer": cand.answer,
                "modality": "knowledge",
                "split": split,
            }
        )
    return records


def generate_from_lines(
    lines: list[str], config: RulesConfig | None = None
) -> list[tuple[str, QaCandidate]]:
    """Process one bracketed parse per line; a line may be ``id<TAB>parse``
    or a bare parse (then the id is the 1-based line number, ``s0001``...)."""
    out: list[tuple[str, QaCandidate]] = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        sid, _, rest = line.partition("\t")
        if rest:
            parse_text = rest
        else:
            sid, parse_text = f"s{lineno:04d}", line
        tree = parse_bracketed(parse_text)
        for cand in filter_candidates(generate_qa(tree, config), config):
            out.append((sid.strip(), cand))
    return out
