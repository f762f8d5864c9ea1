"""Seeded synthetic wiki corpora with known reference identities.

Articles are built from paragraphs of prose sentences, some of which carry a
citation.  Each revision applies one edit drawn from a weighted menu
(add, modify, delete, reinsert, in-place replacement, look-alike citation,
prose edit, new paragraph).  Every rendered citation is tied to the
bibliographic entity it describes, so pairs of occurrences can be labelled
Equivalent or Distinct without annotators.
"""

from __future__ import annotations

import copy
import random
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

from .ingest import BotList, EditorIdentity, EditorKind, RevisionRecord

_SURNAMES = (
    "smith jones taylor brown williams wilson johnson davies robinson wright thompson evans walker "
    "white roberts green hall wood jackson clarke darwin crawford huxley lyell wallace owen hooker "
    "gould mayr dobzhansky fisher haldane wright kimura ohta lewontin margulis woese sanger crick "
    "watson franklin pauling mendel morgan muller sturtevant bridges beadle tatum avery macleod"
).split()
_FIRST = "a b c d e f g h j k l m n p r s t w".split()
_WORDS = (
    "origin species natural selection evolution genetic population variation inheritance cell "
    "protein structure function analysis study review history theory model dynamics climate "
    "ocean river forest soil plant animal insect bird fish marine coastal urban rural economic "
    "social political cultural ancient medieval modern early late northern southern western "
    "eastern survey report census archive record letter journal diary atlas catalogue index "
    "development growth decline change patterns trends effects impact role evidence methods "
    "approach framework introduction principles foundations perspectives advances frontiers "
    "molecular chemical physical biological ecological geological astronomical mathematical"
).split()
_JOURNALS = (
    "Nature", "Science", "Cell", "Genetics", "Evolution", "Ecology Letters", "The Lancet",
    "Annals of Botany", "Journal of Zoology", "Quarterly Review", "Proceedings B",
    "American Naturalist", "Heredity", "Molecular Ecology", "Systematic Biology",
)
_PUBLISHERS = (
    "John Murray", "Oxford University Press", "Cambridge University Press", "Penguin",
    "Harvard University Press", "Springer", "Wiley", "Routledge", "Macmillan",
)
_PROSE = (
    "the region was first described in the early period and later revised by several authors "
    "many observers noted the change although the evidence remained limited for decades "
    "subsequent work extended these findings to other areas and groups "
    "this view has been challenged on several grounds including sampling and method "
    "recent surveys suggest a more complex picture with marked local variation "
    "the term is now widely used in the literature and in popular accounts"
).split()

EPOCH = datetime(2005, 1, 1, tzinfo=timezone.utc)
COLLECTION = datetime(2019, 6, 1, tzinfo=timezone.utc)


def _isbn13(rng: random.Random) -> str:
    digits = [9, 7, 8] + [rng.randrange(10) for _ in range(9)]
    check = (10 - sum(d * (1 if i % 2 == 0 else 3) for i, d in enumerate(digits)) % 10) % 10
    d = "".join(map(str, digits + [check]))
    return f"{d[:3]}-{d[3]}-{d[4:8]}-{d[8:12]}-{d[12]}"


def _url(rng: random.Random) -> str:
    host = rng.choice(("www.example.org", "archive.example.net", "books.example.com", "news.example.co.uk"))
    path = "/".join(rng.sample(_WORDS, rng.randrange(1, 4)))
    return f"https://{host}/{path}/{rng.randrange(10_000, 99_999)}"


def _date(rng: random.Random) -> str:
    return f"{rng.randrange(2005, 2019)}-{rng.randrange(1, 13):02d}-{rng.randrange(1, 29):02d}"


def _doi(rng: random.Random) -> str:
    suffix = "".join(rng.choice("abcdefghijklmnopqrstuvwxyz0123456789") for _ in range(8))
    return f"10.{rng.randrange(1000, 9999)}/{suffix}"


@dataclass
class Entity:
    """One bibliographic resource and the current wording of its citation."""

    entity_id: int
    kind: str
    last: str
    first: str
    year: int
    title: list[str]
    container: str
    volume: int
    pages: tuple[int, int]
    doi: str
    isbn: str
    coauthors: list[str] = field(default_factory=list)
    url: str = ""
    accessed: str = ""
    style: str = "plain"
    present: set = field(default_factory=set)
    name: str | None = None

    def render(self) -> str:
        title = " ".join(self.title).capitalize()
        if self.style == "template":
            parts = [f"{{{{cite {self.kind} |last={self.last.capitalize()} |first={self.first.upper()}."]
            if "coauthors" in self.present and self.coauthors:
                parts.append("|coauthors=" + ", ".join(a.capitalize() for a in self.coauthors))
            parts.append(f"|year={self.year} |title={title}")
            if self.kind == "journal":
                parts.append(f"|journal={self.container}")
                if "volume" in self.present:
                    parts.append(f"|volume={self.volume}")
            else:
                parts.append(f"|publisher={self.container}")
            if "pages" in self.present:
                parts.append(f"|pages={self.pages[0]}-{self.pages[1]}")
            if "doi" in self.present:
                parts.append(f"|doi={self.doi}")
            if "isbn" in self.present:
                parts.append(f"|isbn={self.isbn}")
            if "url" in self.present:
                parts.append(f"|url={self.url}")
                if "accessed" in self.present:
                    parts.append(f"|access-date={self.accessed}")
            return " ".join(parts) + "}}"
        authors = f"{self.last.capitalize()}, {self.first.upper()}."
        if "coauthors" in self.present and self.coauthors:
            authors += "; " + "; ".join(a.capitalize() for a in self.coauthors)
        out = f"{authors} ({self.year}). {title}. {self.container}"
        if self.kind == "journal" and "volume" in self.present:
            out += f" {self.volume}"
        if "pages" in self.present:
            out += f", pp. {self.pages[0]}-{self.pages[1]}"
        out += "."
        if "doi" in self.present:
            out += f" doi:{self.doi}"
        if "isbn" in self.present:
            out += f" ISBN {self.isbn}"
        if "url" in self.present:
            out += f" [{self.url} online]"
            if "accessed" in self.present:
                out += f" Retrieved {self.accessed}."
        return out


@dataclass
class _Slot:
    entity: Entity | None
    prose: list[str]


@dataclass
class SynthConfig:
    n_articles: int = 20
    min_revisions: int = 5
    max_revisions: int = 40
    max_refs: int | None = None
    initial_refs: tuple[int, int] = (1, 4)
    did_rate: float = 0.35
    weights: dict = field(default_factory=lambda: {
        "add": 0.22, "modify": 0.28, "delete": 0.11, "reinsert": 0.08, "replace": 0.02,
        "confuser": 0.07, "prose": 0.17, "paragraph": 0.05,
    })
    # Planted identifier scenarios: "mixed", "dborn_static" or "dlag".
    did_mode: str = "mixed"
    start: datetime = EPOCH
    end: datetime = COLLECTION
    first_revision_id: int = 1000


@dataclass
class SynthCorpus:
    articles: list[tuple[int, list[RevisionRecord]]]
    truth: dict[tuple[int, int, int], int]
    bots: BotList
    confusers: int = 0
    planted: dict[str, int] = field(default_factory=dict)

    @property
    def n_revisions(self) -> int:
        return sum(len(r) for _, r in self.articles)


class _Editors:
    def __init__(self, rng: random.Random):
        self.rng = rng
        self.registered = [f"Editor{i:03d}" for i in range(120)]
        self.bots = [f"CiteBot{i}" for i in range(4)]

    def pick(self, op: str) -> EditorIdentity:
        r = self.rng.random()
        if op == "modify" and r < 0.3:
            return EditorIdentity(EditorKind.BOT, user_name=self.rng.choice(self.bots))
        if op == "delete" and r < 0.35 or r < 0.12:
            ip = ".".join(str(self.rng.randrange(1, 255)) for _ in range(4))
            return EditorIdentity(EditorKind.NONREGISTERED, ip=ip)
        # Heavy-tailed activity among registered accounts.
        idx = min(int(self.rng.paretovariate(1.2)) - 1, len(self.registered) - 1)
        return EditorIdentity(EditorKind.REGISTERED, user_name=self.registered[idx])


class _Article:
    def __init__(self, gen: "Generator", article_id: int):
        self.gen = gen
        self.rng = gen.rng
        self.article_id = article_id
        self.paragraphs: list[list[_Slot]] = []
        self.deleted: list[tuple[int, _Slot, Entity]] = []

    def sentence(self) -> list[str]:
        n = self.rng.randrange(5, 12)
        start = self.rng.randrange(len(_PROSE) - n)
        words = _PROSE[start:start + n]
        return [words[0].capitalize()] + words[1:]

    def slots(self):
        for p in self.paragraphs:
            for s in p:
                if s.entity is not None:
                    yield s

    def n_refs(self) -> int:
        return sum(1 for _ in self.slots())

    def render(self) -> str:
        paras = []
        for p in self.paragraphs:
            sents = []
            for s in p:
                body = " ".join(s.prose) + "."
                if s.entity is not None:
                    e = s.entity
                    open_tag = f'<ref name="{e.name}">' if e.name else "<ref>"
                    body += f"{open_tag}{e.render()}</ref>"
                sents.append(body)
            paras.append(" ".join(sents))
        return "\n\n".join(paras)

    def ref_entities(self) -> list[int]:
        return [s.entity.entity_id for s in self.slots()]


class Generator:
    def __init__(self, seed: int = 0, cfg: SynthConfig | None = None):
        self.rng = random.Random(seed)
        self.cfg = cfg or SynthConfig()
        self.editors = _Editors(self.rng)
        self.next_entity = 0
        self.confusers = 0
        self.planted: dict[str, int] = {}

    def _plant(self, what: str) -> None:
        self.planted[what] = self.planted.get(what, 0) + 1

    def entity(self, with_did: bool | None = None) -> Entity:
        rng = self.rng
        kind = "journal" if rng.random() < 0.65 else "book"
        self.next_entity += 1
        e = Entity(
            entity_id=self.next_entity,
            kind=kind,
            last=rng.choice(_SURNAMES),
            first=rng.choice(_FIRST),
            year=rng.randrange(1850, 2019),
            title=rng.sample(_WORDS, rng.randrange(4, 11)),
            container=rng.choice(_JOURNALS if kind == "journal" else _PUBLISHERS),
            volume=rng.randrange(1, 300),
            pages=(a := rng.randrange(1, 900), a + rng.randrange(1, 40)),
            doi=_doi(rng),
            isbn=_isbn13(rng),
            coauthors=rng.sample(_SURNAMES, rng.randrange(1, 4)),
            url=_url(rng),
            accessed=_date(rng),
            style="template" if rng.random() < 0.5 else "plain",
            name=f"r{self.next_entity}" if rng.random() < 0.15 else None,
        )
        if with_did is None:
            with_did = self._did_at_birth()
        if with_did:
            e.present.add("doi" if kind == "journal" else "isbn")
        for opt in ("volume", "pages", "coauthors", "url", "accessed"):
            if rng.random() < 0.5:
                e.present.add(opt)
        return e

    def _did_at_birth(self) -> bool:
        mode = self.cfg.did_mode
        if mode == "dborn_static":
            return True
        if mode == "dlag":
            return self.rng.random() < 0.3
        return self.rng.random() < self.cfg.did_rate

    # -- edit operations: each returns True when it changed something --------

    def _op_add(self, art: _Article) -> bool:
        if self.cfg.max_refs is not None and art.n_refs() >= self.cfg.max_refs:
            return False
        if not art.paragraphs:
            art.paragraphs.append([])
        para = self.rng.choice(art.paragraphs)
        slot = _Slot(self.entity(), art.sentence())
        para.insert(self.rng.randrange(len(para) + 1), slot)
        return True

    def _op_modify(self, art: _Article) -> bool:
        if self.cfg.did_mode == "dborn_static":
            return False
        slots = list(art.slots())
        if not slots:
            return False
        target = self.rng.choice(slots)
        e = copy.deepcopy(target.entity)
        rng = self.rng
        did_field = "doi" if e.kind == "journal" else "isbn"
        choices = ["title", "year", "first", "pages", "volume", "coauthors", "url", "accessed", "style"]
        if did_field not in e.present:
            choices += [did_field] * (6 if self.cfg.did_mode == "dlag" else 1)
        # Mostly single touches; sometimes a thorough rewrite.
        n_changes = 1 if rng.random() < 0.6 else rng.randrange(2, 6)
        for what in rng.sample(choices, min(n_changes, len(choices))):
            if what == "title":
                for _ in range(rng.randrange(1, 3)):
                    e.title[rng.randrange(len(e.title))] = rng.choice(_WORDS)
            elif what == "year":
                e.year += rng.choice((-1, 1))
            elif what == "first":
                e.first = rng.choice(_FIRST)
            elif what in ("pages", "volume", "coauthors", "url", "accessed"):
                e.present ^= {what}
            elif what == "style":
                e.style = "plain" if e.style == "template" else "template"
            elif what not in e.present:
                e.present.add(what)
                self._plant("did_added")
        target.entity = e
        self._plant("modify")
        return True

    def _op_delete(self, art: _Article) -> bool:
        located = [(pi, si) for pi, p in enumerate(art.paragraphs) for si, s in enumerate(p) if s.entity]
        if not located:
            return False
        pi, si = self.rng.choice(located)
        slot = art.paragraphs[pi][si]
        art.deleted.append((pi, slot, slot.entity))
        if self.rng.random() < 0.5:
            del art.paragraphs[pi][si]
        else:
            art.paragraphs[pi][si] = _Slot(None, slot.prose)
        self._plant("delete")
        return True

    def _op_reinsert(self, art: _Article) -> bool:
        present = {s.entity.entity_id for s in art.slots()}
        options = [d for d in art.deleted if d[2].entity_id not in present]
        if not options or (self.cfg.max_refs is not None and art.n_refs() >= self.cfg.max_refs):
            return False
        pi, slot, ent = self.rng.choice(options)
        art.deleted.remove((pi, slot, ent))
        pi = min(pi, len(art.paragraphs) - 1)
        para = art.paragraphs[pi]
        for i, s in enumerate(para):
            if s is slot or (s.entity is None and s.prose == slot.prose):
                para[i] = _Slot(ent, slot.prose)
                break
        else:
            para.insert(self.rng.randrange(len(para) + 1), _Slot(ent, slot.prose))
        self._plant("reinsert")
        return True

    def _op_replace(self, art: _Article) -> bool:
        slots = list(art.slots())
        if not slots or self.cfg.did_mode == "dborn_static":
            return False
        slot = self.rng.choice(slots)
        new = self.entity()
        new.style = slot.entity.style
        new.kind = slot.entity.kind
        new.container = slot.entity.container
        slot.entity = new
        self._plant("replace")
        return True

    def _op_confuser(self, art: _Article) -> bool:
        slots = list(art.slots())
        if not slots or len(art.paragraphs) < 2:
            return False
        if self.cfg.max_refs is not None and art.n_refs() >= self.cfg.max_refs:
            return False
        src = self.rng.choice(slots).entity
        src_para = next(pi for pi, p in enumerate(art.paragraphs) for s in p if s.entity is src)
        new = self.entity()
        new.style = src.style
        new.kind = src.kind
        new.container = src.container
        new.present = set(src.present)
        if self.rng.random() < 0.5:
            new.last, new.first = src.last, src.first
            keep = self.rng.randrange(1, len(src.title))
            new.title = src.title[:keep] + new.title[: max(1, len(new.title) - keep)]
        else:
            new.title = list(src.title)
            new.year = src.year
        others = [pi for pi in range(len(art.paragraphs)) if pi != src_para]
        para = art.paragraphs[self.rng.choice(others)]
        para.insert(self.rng.randrange(len(para) + 1), _Slot(new, art.sentence()))
        self.confusers += 1
        self._plant("confuser")
        return True

    def _op_prose(self, art: _Article) -> bool:
        located = [s for p in art.paragraphs for s in p]
        if not located:
            return False
        slot = self.rng.choice(located)
        if self.rng.random() < 0.5 and len(slot.prose) > 3:
            del slot.prose[self.rng.randrange(1, len(slot.prose))]
        else:
            slot.prose.insert(self.rng.randrange(1, len(slot.prose) + 1), self.rng.choice(_PROSE))
        return True

    def _op_paragraph(self, art: _Article) -> bool:
        n = self.rng.randrange(1, 4)
        art.paragraphs.insert(self.rng.randrange(len(art.paragraphs) + 1), [_Slot(None, art.sentence()) for _ in range(n)])
        return True

    def _step(self, art: _Article) -> str:
        ops = self.cfg.weights
        names = sorted(ops)
        for _ in range(20):
            op = self.rng.choices(names, weights=[ops[n] for n in names])[0]
            if getattr(self, f"_op_{op}")(art):
                return op
        self._op_prose(art)
        return "prose"

    def article(self, article_id: int, next_rev: int) -> tuple[list[RevisionRecord], dict, int]:
        cfg = self.cfg
        rng = self.rng
        art = _Article(self, article_id)
        n_paras = rng.randrange(2, 5)
        art.paragraphs = [[_Slot(None, art.sentence()) for _ in range(rng.randrange(1, 4))] for _ in range(n_paras)]
        lo, hi = cfg.initial_refs
        for _ in range(rng.randrange(lo, hi + 1)):
            self._op_add(art)
        n_revs = rng.randrange(cfg.min_revisions, cfg.max_revisions + 1)
        span = (cfg.end - cfg.start).total_seconds()
        t = cfg.start + timedelta(seconds=int(rng.random() * span * 0.6))
        step = max(3600.0, (cfg.end - t).total_seconds() / max(n_revs, 1))
        title = f"Synthetic article {article_id}"
        records, truth = [], {}
        rev_id = next_rev
        for j in range(n_revs):
            op = "add" if j == 0 else self._step(art)
            editor = self.editors.pick(op)
            records.append(RevisionRecord(article_id, title, rev_id, t, editor, art.render()))
            for idx, ent in enumerate(art.ref_entities()):
                truth[(article_id, rev_id, idx)] = ent
            rev_id += 1
            t = t + timedelta(seconds=int(rng.uniform(0.2, 1.8) * step) + 1)
            if t >= cfg.end:
                break
        return records, truth, rev_id

    def corpus(self) -> SynthCorpus:
        articles, truth = [], {}
        rev = self.cfg.first_revision_id
        for aid in range(1, self.cfg.n_articles + 1):
            records, tr, rev = self.article(aid, rev)
            articles.append((aid, records))
            truth.update(tr)
        bots = BotList.from_names(self.editors.bots)
        return SynthCorpus(articles, truth, bots, self.confusers, dict(self.planted))


def generate_corpus(seed: int = 0, **kwargs) -> SynthCorpus:
    return Generator(seed, SynthConfig(**kwargs)).corpus()
