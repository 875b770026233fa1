"""The builtin atomic services: each one a pure envelope -> envelope transformation."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable

from ..envelope import DocumentEnvelope
from ..errors import InvalidDescriptor, MissingField
from ..registry import ServiceDescriptor
from . import cp1251, langid, scoring, text
from .resources import (
    EMPTY_STOPLIST,
    EMPTY_TERMS,
    Lexicon,
    StopList,
    TermLexicon,
    load_abbreviations,
    load_lexicon,
    load_stoplist,
    load_term_lexicon,
)

Handler = Callable[[DocumentEnvelope, dict[str, Any]], DocumentEnvelope]

DATA_DIR = Path(__file__).resolve().parent.parent / "data"


@dataclass(frozen=True)
class Resources:
    """Immutable language resources, keyed by 2-letter language code.

    Services pick the resource for ``envelope.language`` and fall back to
    ``default_lang`` when the envelope has no language or no resource for it.
    """

    profiles: tuple[langid.LanguageProfile, ...] = ()
    lexicons: dict[str, Lexicon] = field(default_factory=dict)
    stoplists: dict[str, StopList] = field(default_factory=dict)
    term_lexicons: dict[str, TermLexicon] = field(default_factory=dict)
    abbreviations: dict[str, frozenset[str]] = field(default_factory=dict)
    default_lang: str = "en"

    def pick(self, table: dict[str, Any], lang: str | None) -> Any:
        if lang is not None and lang in table:
            return table[lang]
        return table.get(self.default_lang)

    @classmethod
    def from_dir(cls, root: str | Path = DATA_DIR, default_lang: str = "en") -> Resources:
        """Load ``<lang>.profile.json``, ``.lex``, ``.stop``, ``.terms`` and ``.abbr`` files."""
        root = Path(root)
        profiles = tuple(langid.load_profile(p) for p in sorted(root.glob("*.profile.json")))
        lang_of = lambda p: p.name.split(".")[0]  # noqa: E731
        return cls(
            profiles=profiles,
            lexicons={lang_of(p): load_lexicon(p) for p in sorted(root.glob("*.lex"))},
            stoplists={lang_of(p): load_stoplist(p) for p in sorted(root.glob("*.stop"))},
            term_lexicons={lang_of(p): load_term_lexicon(p) for p in sorted(root.glob("*.terms"))},
            abbreviations={lang_of(p): load_abbreviations(p) for p in sorted(root.glob("*.abbr"))},
            default_lang=default_lang,
        )


def _need(env: DocumentEnvelope, name: str) -> Any:
    value = getattr(env, name)
    if value is None:
        raise MissingField(f"envelope has no {name!r}", field=name)
    return value


def _int_param(params: dict[str, Any], name: str, default: int) -> int:
    value = params.get(name, default)
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise InvalidDescriptor(f"parameter {name!r} must be a non-negative integer")
    return value


def build_builtins(resources: Resources, indexer: Callable[[DocumentEnvelope], int] | None = None) -> dict[str, tuple[ServiceDescriptor, Handler]]:
    """Descriptor and handler for every reference service.

    ``indexer`` backs ``index_document``; without one that service is omitted.
    """
    r = resources

    def detect_language(env: DocumentEnvelope, params: dict) -> DocumentEnvelope:
        lang, confidence = langid.detect_language(_need(env, "text"), r.profiles)
        return replace(env, language=lang, attrs={**env.attrs, "language_confidence": confidence})

    def split_sentences(env: DocumentEnvelope, params: dict) -> DocumentEnvelope:
        abbrevs = r.pick(r.abbreviations, env.language) or frozenset()
        return replace(env, sentences=text.split_sentences(_need(env, "text"), abbrevs))

    def tokenize(env: DocumentEnvelope, params: dict) -> DocumentEnvelope:
        return replace(env, tokens=text.tokenize(_need(env, "text")))

    def lemmatize(env: DocumentEnvelope, params: dict) -> DocumentEnvelope:
        return replace(env, tokens=text.lemmatize(_need(env, "tokens"), r.pick(r.lexicons, env.language)))

    def segment_terms(env: DocumentEnvelope, params: dict) -> DocumentEnvelope:
        terms = r.pick(r.term_lexicons, env.language) or EMPTY_TERMS
        return replace(env, terms=text.segment_terms(_need(env, "tokens"), terms))

    def stopfilter(env: DocumentEnvelope, params: dict) -> DocumentEnvelope:
        stoplist = r.pick(r.stoplists, env.language)
        tokens = text.filter_stopwords(_need(env, "tokens"), stoplist)
        terms = text.filter_stopwords(env.terms, stoplist) if env.terms is not None else None
        return replace(env, tokens=tokens, terms=terms)

    def summarize(env: DocumentEnvelope, params: dict) -> DocumentEnvelope:
        sentences = _need(env, "sentences")
        lexicon = r.pick(r.lexicons, env.language)
        token_lists = [text.tokenize(s) for s in sentences]
        if lexicon is not None:
            token_lists = [text.lemmatize(ts, lexicon) for ts in token_lists]
        stoplist = r.pick(r.stoplists, env.language) or EMPTY_STOPLIST
        k = _int_param(params, "k", 3)
        return replace(env, summary=scoring.summarize(sentences, token_lists, stoplist, k))

    def extract_keywords(env: DocumentEnvelope, params: dict) -> DocumentEnvelope:
        stoplist = r.pick(r.stoplists, env.language) or EMPTY_STOPLIST
        n = _int_param(params, "n", 10)
        return replace(env, keywords=scoring.extract_keywords(_need(env, "tokens"), stoplist, n))

    def to_win1251(env: DocumentEnvelope, params: dict) -> DocumentEnvelope:
        mode = params.get("mode", "strict")
        if mode not in ("strict", "lossy"):
            raise InvalidDescriptor("mode must be 'strict' or 'lossy'")
        encoded = cp1251.to_win1251(_need(env, "text"), strict=mode == "strict")
        return replace(env, encoded=encoded, media_type="text/plain; charset=windows-1251")

    table: list[tuple[str, set[str], set[str], bool, Handler]] = [
        ("detect_language", {"text"}, {"language"}, True, detect_language),
        ("split_sentences", {"text"}, {"sentences"}, True, split_sentences),
        ("tokenize", {"text"}, {"tokens"}, True, tokenize),
        ("lemmatize", {"tokens"}, {"tokens"}, True, lemmatize),
        ("segment_terms", {"tokens"}, {"terms"}, True, segment_terms),
        ("stopfilter", {"tokens"}, {"tokens"}, True, stopfilter),
        ("summarize", {"sentences"}, {"summary"}, True, summarize),
        ("extract_keywords", {"tokens"}, {"keywords"}, True, extract_keywords),
        ("to_win1251", {"text"}, {"encoded"}, True, to_win1251),
    ]

    if indexer is not None:

        def index_document(env: DocumentEnvelope, params: dict) -> DocumentEnvelope:
            count = indexer(env)
            return replace(env, attrs={**env.attrs, "indexed": count})

        # Writes to the shared index, so never served from cache.
        table.append(("index_document", {"tokens"}, {"indexed"}, False, index_document))

    return {
        name: (ServiceDescriptor(name, "builtin", (), frozenset(req), frozenset(prov), cacheable, "1.0"), handler)
        for name, req, prov, cacheable, handler in table
    }
