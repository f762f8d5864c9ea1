"""``refhist`` command line: one subcommand per pipeline stage.

Exit status is 0 on success, 1 on a usage error and 2 on a data error.
Every output begins with a provenance header (``#`` comment lines, a
``"header"`` object in JSON, ``//`` lines in DOT).  A stage whose outputs
already carry the fingerprint of the current inputs and settings is skipped
unless ``--force`` is given.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import os
import sys
import time
from collections import Counter, deque
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Iterator

import numpy as np

from . import __version__
from .analytics import clustering, editors, stats
from .dids import (
    classify_lifecycle,
    did_additions,
    did_only_histories,
    did_r_share,
    export_did_csv,
    lag_histogram,
    map_did_only_to_full,
    period_end,
    period_range,
    remaining_omitted,
    revisions_from_histories,
)
from .errors import RefhistError
from .evaluation import (
    GOLD_COLUMNS,
    N_STRATA,
    cosine_baseline,
    balanced_threshold,
    jaccard_score,
    parse_thresholds,
    read_gold,
    resampled_micro_metrics,
    resolve_tokens,
    roc_curve,
    stratified_sample,
    stratum_of,
    subset_override,
    threshold_sweep,
)
from .history import ACTIONS, MatcherConfig, RefHistory, dumps_history, read_histories
from .ingest import EditorKind, IngestStats, export_jsonl, load_botlist, parse_timestamp, read_corpus
from .pipeline import process_article
from .runinfo import fingerprint, header_fields, parse_config, up_to_date, write_header

PROGRESS_EVERY = 10_000
# Settings that never change output content; input files enter the fingerprint by digest instead.
_NOT_CONFIG = {
    "command", "config", "force", "progress", "jobs", "out", "handler",
    "inputs", "bots", "gold", "hist", "distribution", "reference_ranking",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _warn(msg: str) -> None:
    print(f"refhist: warning: {msg}", file=sys.stderr)


def _parse_cutoff(value: str) -> datetime:
    try:
        z = datetime.fromisoformat(value.replace("Z", "+00:00"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid cutoff {value!r}; use YYYY-MM-DD or an ISO timestamp") from None
    return z.replace(tzinfo=timezone.utc) if z.tzinfo is None else z.astimezone(timezone.utc)


def _infer_format(path: str, fmt: str | None) -> str:
    if fmt:
        return fmt
    name = path.lower()
    if name.endswith(".xml"):
        return "xml"
    if name.endswith((".jsonl", ".json", ".ndjson")):
        return "jsonl"
    raise UsageError(f"cannot infer the format of {path}; pass --format")


def _sibling(out: str, suffix: str, ext: str | None = None) -> Path:
    p = Path(out)
    return p.with_name(f"{p.stem}_{suffix}{ext if ext is not None else p.suffix}")


@contextlib.contextmanager
def _atomic(path: str | Path) -> Iterator:
    path = Path(path)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".part")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        yield fh
    os.replace(tmp, path)


class _Progress:
    def __init__(self, enabled: bool):
        self.enabled = enabled
        self.count = 0
        self.next = PROGRESS_EVERY
        self.start = time.perf_counter()

    def add(self, n: int) -> None:
        self.count += n
        if self.enabled and self.count >= self.next:
            rate = self.count / max(time.perf_counter() - self.start, 1e-9)
            print(f"refhist: {self.count} revisions ({rate:.0f}/s)", file=sys.stderr)
            while self.next <= self.count:
                self.next += PROGRESS_EVERY


def _ordered_map(fn: Callable, items: Iterable, jobs: int) -> Iterator:
    """``map`` with up to ``jobs`` worker processes; results keep input order."""
    if jobs <= 1:
        yield from map(fn, items)
        return
    window = jobs * 4
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        pending: deque = deque()
        for item in items:
            pending.append(pool.submit(fn, item))
            if len(pending) >= window:
                yield pending.popleft().result()
        while pending:
            yield pending.popleft().result()


class _Stage:
    """Header, fingerprint and restart handling shared by all subcommands."""

    def __init__(self, args: argparse.Namespace, inputs: list[str], outputs: list[Path]):
        self.args = args
        self.config = {k: _jsonable(v) for k, v in sorted(vars(args).items()) if k not in _NOT_CONFIG}
        self.inputs = inputs
        self.outputs = outputs
        self.fp = fingerprint(args.command, self.config, inputs)
        self.fields = header_fields(args.command, self.config, {"seed": args.seed}, self.fp)

    def skip(self) -> bool:
        if self.args.force or not up_to_date(self.outputs, self.fp):
            return False
        print(f"refhist: {self.args.command}: outputs up to date, nothing to do", file=sys.stderr)
        return True

    def header(self, fh, prefix: str = "# ") -> None:
        write_header(fh, self.fields, prefix)

    def json_doc(self, body: dict) -> str:
        return json.dumps({"header": self.fields, **body}, indent=1, sort_keys=True) + "\n"


def _jsonable(v):
    if isinstance(v, datetime):
        return v.isoformat()
    if isinstance(v, tuple):
        return list(v)
    return v


def _check_cutoff(cutoff: datetime | None, latest: datetime | None) -> None:
    if cutoff is not None and latest is not None and latest > cutoff:
        _warn(f"input contains timestamps after the cutoff ({latest.isoformat()} > {cutoff.isoformat()})")


def _need(args, name: str, flag: str) -> None:
    if not getattr(args, name):
        raise UsageError(f"refhist {args.command}: {flag} is required")


def _iter_corpus(args, stats_: IngestStats) -> Iterator:
    bots = load_botlist(args.bots) if getattr(args, "bots", None) else None
    for path in args.inputs:
        fmt = _infer_format(path, args.format)
        yield from read_corpus(path, fmt, bots, stats_, getattr(args, "skip_reverted", False))


def _corpus_inputs(args) -> list[str]:
    return list(args.inputs) + list(getattr(args, "bots", None) or [])


def _report_ingest(st: IngestStats) -> None:
    if st.skipped_revisions:
        reasons = ", ".join(f"{k}={v}" for k, v in sorted(st.reasons.items()))
        _warn(f"skipped {st.skipped_revisions} revisions ({reasons})")


def _load_histories(args) -> dict[int, list[RefHistory]]:
    out: dict[int, list[RefHistory]] = {}
    for path in args.inputs:
        with open(path, encoding="utf-8") as fh:
            for aid, hs in read_histories(fh).items():
                out.setdefault(aid, []).extend(hs)
    latest = max((s.z for hs in out.values() for h in hs for s in h.snapshots), default=None)
    _check_cutoff(args.cutoff, latest)
    return out


# -- subcommands ----------------------------------------------------------------

def cmd_ingest(args) -> None:
    stage = _Stage(args, _corpus_inputs(args), [Path(args.out)])
    if stage.skip():
        return
    st = IngestStats()
    progress = _Progress(args.progress)
    latest = None
    with _atomic(args.out) as fh:
        stage.header(fh)
        for aid, revs in _iter_corpus(args, st):
            export_jsonl([(aid, revs)], fh)
            progress.add(len(revs))
            if revs:
                z = max(r.timestamp for r in revs)
                latest = z if latest is None or z > latest else latest
    _report_ingest(st)
    _check_cutoff(args.cutoff, latest)


def _histories_worker(job) -> tuple[int, list[str], int, datetime | None]:
    aid, revs, cfg, with_tokens = job
    res = process_article(aid, revs, cfg)
    lines = [dumps_history(h, with_tokens) for h in res.histories]
    latest = max((r.timestamp for r in revs), default=None)
    return aid, lines, len(revs), latest


def cmd_histories(args) -> None:
    stage = _Stage(args, _corpus_inputs(args), [Path(args.out)])
    if stage.skip():
        return
    cfg = MatcherConfig(args.jaccard_threshold, not args.no_subset_rule)
    st = IngestStats()
    progress = _Progress(args.progress)
    latest = None
    n_hist = 0
    jobs = ((aid, revs, cfg, args.with_tokens) for aid, revs in _iter_corpus(args, st))
    with _atomic(args.out) as fh:
        stage.header(fh)
        for aid, lines, n_revs, z in _ordered_map(_histories_worker, jobs, args.jobs):
            for line in lines:
                fh.write(line + "\n")
            n_hist += len(lines)
            progress.add(n_revs)
            if z is not None and (latest is None or z > latest):
                latest = z
    _report_ingest(st)
    _check_cutoff(args.cutoff, latest)
    print(f"refhist: {n_hist} histories from {progress.count} revisions", file=sys.stderr)


def _periods(histories: Iterable[RefHistory], cutoff: datetime | None, granularity: str) -> list[str]:
    times = [s.z for h in histories for s in h.snapshots]
    if not times:
        return []
    end = cutoff if cutoff is not None else max(times)
    return period_range(min(times), end, granularity)


def _instant(z: datetime) -> str:
    return z.strftime("%Y-%m-%dT%H:%M:%SZ")


def cmd_dids(args) -> None:
    outs = [Path(args.out)] + [_sibling(args.out, s) for s in ("additions", "lag", "share", "omitted")]
    stage = _Stage(args, list(args.inputs), outs)
    if stage.skip():
        return
    by_article = _load_histories(args)
    cutoff = args.cutoff
    all_h: list[RefHistory] = []
    all_lc = []
    starts = []
    additions: Counter = Counter()
    with _atomic(outs[0]) as fh:
        stage.header(fh)
        first = True
        for aid in by_article:
            hs = by_article[aid]
            lcs = [classify_lifecycle(h, cutoff=cutoff) for h in hs]
            export_did_csv(aid, hs, lcs, fh, header=first)
            first = False
            additions.update(did_additions(hs, args.granularity, cutoff))
            revs = revisions_from_histories(hs)
            if cutoff is not None:
                revs = [r for r in revs if r.timestamp <= cutoff]
            dh = did_only_histories(aid, revs)
            offset = len(all_h)
            for d, m in zip(dh, map_did_only_to_full(dh, hs)):
                starts.append((d.created, None if m is None else offset + m))
            all_h.extend(hs)
            all_lc.extend(lcs)
        if first:
            export_did_csv(0, [], [], fh, header=True)
    periods = _periods(all_h, cutoff, args.granularity)

    with _atomic(outs[1]) as fh:
        stage.header(fh)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["period", "did_additions"])
        for p in periods:
            w.writerow([p, additions.get(p, 0)])
    with _atomic(outs[2]) as fh:
        stage.header(fh)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["creation_year", "lag_days", "count"])
        for year, counter in sorted(lag_histogram(all_h, all_lc).items()):
            for lag, n in sorted(counter.items()):
                w.writerow([year, lag, n])
    with _atomic(outs[3]) as fh:
        stage.header(fh)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["period", "instant", "full_pct", "did_only_pct"])
        instants = [period_end(p) for p in periods]
        for p, (tau, a, b) in zip(periods, did_r_share(all_h, all_lc, starts, instants)):
            w.writerow([p, _instant(tau), f"{a:.6f}", f"{b:.6f}"])
    with _atomic(outs[4]) as fh:
        stage.header(fh)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["period", "still_missing", "dlag_existing", "pct"])
        for p, miss, n, pct in remaining_omitted(all_h, all_lc, periods):
            w.writerow([p, miss, n, f"{pct:.6f}"])


def cmd_stats(args) -> None:
    outs = [Path(args.out)] + [_sibling(args.out, s) for s in ("survival", "articles", "kinds")]
    stage = _Stage(args, list(args.inputs), outs)
    if stage.skip():
        return
    by_article = _load_histories(args)
    cutoff = args.cutoff
    hs: list[RefHistory] = []
    lcs = []
    per_article = {}
    for aid, group in by_article.items():
        lc = [classify_lifecycle(h, cutoff=cutoff) for h in group]
        per_article[aid] = (group, lc)
        hs.extend(group)
        lcs.extend(lc)
    did_r = [lc is not None and lc.is_did_r for lc in lcs]

    with _atomic(outs[0]) as fh:
        stage.header(fh)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["period", "subset", "action", "count", "proportion"])
        for subset, select in (("all", None), ("did_r", did_r)):
            tl = stats.action_timeline(hs, args.period, select, cutoff)
            for i, p in enumerate(tl.periods):
                for a in ACTIONS:
                    w.writerow([p, subset, a.value, tl.counts[a][i], f"{tl.proportions[a][i]:.6f}"])
    with _atomic(outs[1]) as fh:
        stage.header(fh)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["period", "instant", "deleted_all", "deleted_did_r"])
        periods = _periods(hs, cutoff, args.period)
        instants = [period_end(p) for p in periods]
        for p, (tau, a, b) in zip(periods, stats.deletion_survival(hs, instants, did_r, cutoff)):
            w.writerow([p, _instant(tau), f"{a:.6f}", f"{b:.6f}"])
    with _atomic(outs[2]) as fh:
        stage.header(fh)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["article_id", "n_refs", "n_did_r", "category"])
        for s in stats.article_summaries(per_article, cutoff):
            w.writerow([s.article_id, s.n_refs, s.n_did_r, s.category])
    with _atomic(outs[3]) as fh:
        stage.header(fh)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", "count"])
        for kind, n in sorted(stats.did_kind_counts(lcs).items()):
            w.writerow([kind, n])


def _editor_kinds(args) -> tuple[EditorKind, ...]:
    return (EditorKind.REGISTERED, EditorKind.BOT) if args.include_bots else (EditorKind.REGISTERED,)


_RANKINGS = [("total", None)] + [(a.value, a) for a in ACTIONS]


def cmd_editors(args) -> None:
    outs = [Path(args.out), _sibling(args.out, "kinds"), _sibling(args.out, "ecdf")]
    outs += [_sibling(args.out, f"ranking_{name}") for name, _ in _RANKINGS]
    outs.append(_sibling(args.out, "rbo"))
    inputs = list(args.inputs) + ([args.reference_ranking] if args.reference_ranking else [])
    stage = _Stage(args, inputs, outs)
    if stage.skip():
        return
    if not 0.0 < args.rbo_p < 1.0:
        raise UsageError("refhist editors: --rbo-p must lie strictly between 0 and 1")
    by_article = _load_histories(args)
    profiles = editors.build_profiles(h for hs in by_article.values() for h in hs)
    kinds = _editor_kinds(args)

    rankings = {}
    for (name, action), path in zip(_RANKINGS, outs[3:-1]):
        ranking = editors.rank_editors(profiles, action, kinds)
        rankings[name] = [key for _, key, _ in ranking]
        with _atomic(path) as fh:
            stage.header(fh)
            editors.write_ranking(ranking, fh)
    with _atomic(outs[-1]) as fh:
        stage.header(fh)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ranking_a", "ranking_b", "depth", "rbo", "jaccard_top10", "jaccard_top100"])
        pairs = [(a, b) for i, a in enumerate(rankings) for b in list(rankings)[i + 1:]]
        lists = dict(rankings)
        if args.reference_ranking:
            with open(args.reference_ranking, encoding="utf-8") as rf:
                lists["reference"] = editors.read_ranking(rf)
            pairs = [(name, "reference") for name in rankings]
        for a, b in pairs:
            s, t = lists[a], lists[b]
            depth = min(len(s), len(t))
            if depth == 0:
                w.writerow([a, b, 0, "", "", ""])
                continue
            tops = [f"{editors.topk_jaccard(s, t, k):.6f}" if k <= depth else "" for k in (10, 100)]
            w.writerow([a, b, depth, f"{editors.rbo(s, t, args.rbo_p):.6f}", *tops])
    with _atomic(outs[1]) as fh:
        stage.header(fh)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", "editors", "actions"] + [a.value for a in ACTIONS] + [f"{a.value}_pct" for a in ACTIONS])
        shares = editors.kind_shares(profiles)
        for kind, row in sorted(editors.kind_totals(profiles).items(), key=lambda kv: kv[0].value):
            w.writerow(
                [kind.value, row["editors"], row["actions"]]
                + [row[a.value] for a in ACTIONS]
                + [f"{shares[kind][a.value]:.6f}" for a in ACTIONS]
            )
    with _atomic(outs[2]) as fh:
        stage.header(fh)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", "action", "count", "ecdf"])
        for kind in EditorKind:
            for name, action in _RANKINGS:
                xs, fs = editors.profile_ecdf(profiles, (kind,), action)
                for x, f in zip(xs, fs):
                    w.writerow([kind.value, name, int(x), f"{f:.6f}"])
    with _atomic(outs[0]) as fh:
        stage.header(fh)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["editor", "kind"] + [a.value for a in ACTIONS] + ["total", "articles"])
        for p in profiles:
            w.writerow([p.key, p.kind.value, *p.counts, p.total, p.articles_touched])


def _parse_k_range(spec: str) -> list[int]:
    try:
        if ":" in spec:
            lo, hi = (int(x) for x in spec.split(":"))
            ks = list(range(lo, hi))
        else:
            ks = [int(x) for x in spec.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"invalid --k-range {spec!r}; use START:STOP or a comma list") from None
    if not ks or min(ks) < 1:
        raise UsageError(f"--k-range {spec!r} must name positive cluster counts")
    return sorted(set(ks))


def cmd_cluster(args) -> None:
    outs = [
        Path(args.out),
        _sibling(args.out, "assignments", ".csv"),
        _sibling(args.out, "clustree", ".json"),
        _sibling(args.out, "clustree", ".dot"),
    ]
    ks = _parse_k_range(args.k_range)
    stage = _Stage(args, list(args.inputs), outs)
    if stage.skip():
        return
    by_article = _load_histories(args)
    kinds = set(_editor_kinds(args))
    profiles = [
        p for p in editors.build_profiles(h for hs in by_article.values() for h in hs)
        if p.kind in kinds and p.total > 0
    ]
    if args.sample_size and len(profiles) > args.sample_size:
        rng = np.random.default_rng(args.seed)
        keep = np.sort(rng.choice(len(profiles), size=args.sample_size, replace=False))
        profiles = [profiles[i] for i in keep]
    x = editors.feature_matrix(profiles)
    usable = [k for k in ks if k <= len(profiles)]
    if len(usable) < len(ks):
        _warn(f"skipping k > {len(profiles)} (number of editors)")
    models = []
    for k in usable:
        m = clustering.kmeans(x, k, seed=args.seed)
        if len(np.unique(m.labels)) > 1:
            m.silhouettes, m.mean_silhouette = clustering.silhouette(x, m.labels)
        models.append(m)
    edges, nodes = clustering.clustree(models)

    with _atomic(outs[1]) as fh:
        stage.header(fh)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["editor", "kind"] + [f"k{m.k}" for m in models])
        for i, p in enumerate(profiles):
            w.writerow([p.key, p.kind.value] + [int(m.labels[i]) for m in models])
    with _atomic(outs[2]) as fh:
        body = json.loads(clustering.clustree_json(edges, nodes))
        fh.write(stage.json_doc(body))
    with _atomic(outs[3]) as fh:
        stage.header(fh, "// ")
        fh.write(clustering.clustree_dot(edges, nodes))
    with _atomic(outs[0]) as fh:
        doc = {
            "editors": len(profiles),
            "features": [a.value for a in ACTIONS],
            "models": [
                {
                    "k": m.k,
                    "seed": m.seed,
                    "n_iter": m.n_iter,
                    "inertia": m.inertia,
                    "centroids": m.centroids.tolist(),
                    "sizes": np.bincount(m.labels, minlength=m.k).tolist(),
                    "mean_silhouette": m.mean_silhouette,
                    "cluster_silhouette": (
                        None if m.silhouettes is None else [
                            float(m.silhouettes[m.labels == c].mean()) if (m.labels == c).any() else None
                            for c in range(m.k)
                        ]
                    ),
                }
                for m in models
            ],
        }
        fh.write(stage.json_doc(doc))


def _read_distribution(path: str) -> list[float]:
    with open(path, encoding="utf-8") as fh:
        rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
    try:
        weights = [0.0] * N_STRATA
        for r in rows:
            weights[int(r["stratum"])] = float(r["weight"])
    except (KeyError, ValueError, IndexError) as exc:
        raise RefhistError(f"{path}: invalid stratum distribution ({exc})") from None
    return weights


def cmd_evaluate(args) -> None:
    _need(args, "gold", "--gold")
    outs = [Path(args.out), _sibling(args.out, "roc", ".csv")]
    inputs = [args.gold] + list(args.hist or []) + ([args.distribution] if args.distribution else [])
    stage = _Stage(args, inputs, outs)
    if stage.skip():
        return
    thresholds = parse_thresholds(args.thresholds)
    with open(args.gold, encoding="utf-8") as fh:
        gold = read_gold(fh)
    if args.hist:
        hist: dict[int, list[RefHistory]] = {}
        for path in args.hist:
            with open(path, encoding="utf-8") as fh:
                for aid, hs in read_histories(fh).items():
                    hist.setdefault(aid, []).extend(hs)
        gold, _ = resolve_tokens(gold, hist)
    usable = [p for p in gold if p.usable]
    if not usable:
        raise RefhistError("no usable labelled pairs (all Unclear or below the agreement limit)")
    unresolved = sum(1 for p in usable if not p.tokens_a or not p.tokens_b)
    if unresolved:
        raise RefhistError(
            f"{unresolved} labelled pairs lack token IDs; add tokens columns or pass --hist with histories "
            "written by 'refhist histories --with-tokens'"
        )
    labels = [p.positive for p in usable]
    jac = [jaccard_score(p) for p in usable]
    cos = [cosine_baseline(p.text_a, p.text_b) for p in usable]
    override = None if args.no_subset_rule else [subset_override(p) for p in usable]

    sweep = threshold_sweep(jac, labels, thresholds, override)
    cos_sweep = threshold_sweep(cos, labels, thresholds)
    at = threshold_sweep(jac, labels, [args.threshold], override)[0]
    doc: dict = {
        "pairs": len(gold),
        "usable_pairs": len(usable),
        "positives": sum(labels),
        "threshold": args.threshold,
        "subset_rule": override is not None,
        "metrics": at.as_dict(),
        "balanced_threshold": balanced_threshold(sweep),
        "balanced_threshold_cosine": balanced_threshold(cos_sweep),
        "sweep": [r.as_dict() for r in sweep],
        "sweep_cosine": [r.as_dict() for r in cos_sweep],
    }
    roc_rows = []
    if 0 < sum(labels) < len(labels):
        curves = {"jaccard": roc_curve(jac, labels), "cosine": roc_curve(cos, labels)}
        doc["auc"] = {k: c.auc for k, c in curves.items()}
        for name, c in curves.items():
            for thr, (fpr, tpr) in zip(c.thresholds, c.points):
                roc_rows.append([name, "inf" if thr == float("inf") else f"{thr:.6f}", f"{fpr:.6f}", f"{tpr:.6f}"])
    else:
        _warn("labels are all of one class; ROC omitted")
        doc["auc"] = None
    if args.distribution:
        weights = _read_distribution(args.distribution)
        strata = [stratum_of(s) for s in jac]
        pred = [s > args.threshold for s in jac]
        if override is not None:
            pred = [a or b for a, b in zip(pred, override)]
        rm = resampled_micro_metrics(strata, labels, pred, weights, seed=args.seed, draws=args.draws)
        doc["resampled"] = {
            "precision": rm.precision, "recall": rm.recall, "f1": rm.f1, "accuracy": rm.accuracy,
            "stderr": rm.stderr, "draws": rm.draws, "weights": weights,
        }
    with _atomic(outs[1]) as fh:
        stage.header(fh)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "threshold", "fpr", "tpr"])
        w.writerows(roc_rows)
    with _atomic(outs[0]) as fh:
        fh.write(stage.json_doc(doc))


def _cosine_occ(a, b) -> float:
    return cosine_baseline(a.text, b.text)


def _sample_worker(job):
    aid, revs, cfg = job
    return aid, process_article(aid, revs, cfg).revisions, len(revs)


def cmd_sample(args) -> None:
    stage = _Stage(args, _corpus_inputs(args), [Path(args.out)])
    if stage.skip():
        return
    cfg = MatcherConfig()
    st = IngestStats()
    progress = _Progress(args.progress)
    corpus = []
    latest = None
    jobs = ((aid, revs, cfg) for aid, revs in _iter_corpus(args, st))
    for aid, revs, n in _ordered_map(_sample_worker, jobs, args.jobs):
        corpus.append((aid, revs))
        progress.add(n)
        if revs:
            z = max(r.timestamp for r in revs)
            latest = z if latest is None or z > latest else latest
    _report_ingest(st)
    _check_cutoff(args.cutoff, latest)
    sim = _cosine_occ if args.similarity == "cosine" else None
    kwargs = {"similarity": sim} if sim else {}
    if args.unbounded:
        res = stratified_sample(corpus, bucket_size=None, seed=args.seed, max_attempts=args.max_attempts,
                                max_pairs=args.max_pairs, **kwargs)
    else:
        res = stratified_sample(corpus, bucket_size=args.bucket_size, seed=args.seed,
                                max_attempts=args.max_attempts, **kwargs)
    for note in res.notes:
        _warn(note)
    with _atomic(args.out) as fh:
        stage.header(fh)
        w = csv.writer(fh, lineterminator="\n")
        if args.unbounded:
            total = sum(res.fill)
            w.writerow(["stratum", "lower", "upper", "count", "weight"])
            for s, n in enumerate(res.fill):
                w.writerow([s, s / N_STRATA, (s + 1) / N_STRATA, n, f"{n / total if total else 0.0:.8f}"])
            return
        w.writerow(GOLD_COLUMNS + ["tokens_a", "tokens_b", "stratum", "similarity", "index_a", "index_b"])
        for p in res.pairs:
            w.writerow([
                p.article_id, p.rev_a, p.rev_b, p.text_a, p.text_b, "Unclear", 0,
                " ".join(map(str, p.tokens_a)), " ".join(map(str, p.tokens_b)),
                p.stratum, f"{p.similarity:.6f}", p.index_a, p.index_b,
            ])


# -- parser ---------------------------------------------------------------------

def _shared(p: argparse.ArgumentParser, corpus: bool, need_out: bool = True) -> None:
    g = p.add_argument_group("shared options")
    g.add_argument("--in", dest="inputs", action="append", default=[], metavar="PATH",
                   help="input file (repeatable)")
    g.add_argument("--format", choices=("xml", "jsonl"), default=None,
                   help="input format" + (" (default: from the file extension)" if corpus else ""))
    g.add_argument("--out", required=False, default=None, metavar="PATH", help="primary output file")
    g.add_argument("--config", default=None, metavar="FILE", help="key = value settings overriding flags")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="worker processes (default: all cores)")
    g.add_argument("--cutoff", type=_parse_cutoff, default=None, help="corpus 'as of' instant")
    g.add_argument("--force", action="store_true", help="rerun even if outputs are up to date")
    g.add_argument("--progress", action="store_true", help="report throughput every 10k revisions")
    if corpus:
        p.add_argument("--bots", action="append", default=[], metavar="FILE", help="bot list (repeatable)")
        p.add_argument("--skip-reverted", action="store_true", help="drop identity-reverted revisions")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="refhist", description="Reference edit histories from revision dumps.")
    parser.add_argument("--version", action="version", version=f"refhist {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("ingest", help="normalise dumps to revision JSONL")
    _shared(p, corpus=True)
    p.set_defaults(handler=cmd_ingest)

    p = sub.add_parser("histories", help="build reference histories")
    _shared(p, corpus=True)
    p.add_argument("--with-tokens", action="store_true", help="include token IDs in every snapshot")
    p.add_argument("--jaccard-threshold", type=float, default=0.2)
    p.add_argument("--no-subset-rule", action="store_true")
    p.set_defaults(handler=cmd_histories)

    p = sub.add_parser("dids", help="identifier annotations, lifecycles and timelines")
    _shared(p, corpus=False)
    p.add_argument("--granularity", choices=("month", "year"), default="month")
    p.set_defaults(handler=cmd_dids)

    p = sub.add_parser("stats", help="action timelines, survival and per-article summaries")
    _shared(p, corpus=False)
    p.add_argument("--period", choices=("month", "year"), default="year")
    p.set_defaults(handler=cmd_stats)

    p = sub.add_parser("editors", help="editor profiles, ECDFs and rankings")
    _shared(p, corpus=False)
    p.add_argument("--include-bots", action="store_true", help="rank bots alongside registered editors")
    p.add_argument("--reference-ranking", default=None, metavar="FILE")
    p.add_argument("--rbo-p", type=float, default=0.9)
    p.set_defaults(handler=cmd_editors)

    p = sub.add_parser("cluster", help="k-means over editor action profiles")
    _shared(p, corpus=False)
    p.add_argument("--k-range", default="1:11", help="START:STOP (stop excluded) or a comma list")
    p.add_argument("--sample-size", type=int, default=10_000)
    p.add_argument("--include-bots", action="store_true")
    p.set_defaults(handler=cmd_cluster)

    p = sub.add_parser("evaluate", help="score labelled pairs")
    _shared(p, corpus=False)
    p.add_argument("--gold", default=None, metavar="CSV")
    p.add_argument("--hist", action="append", default=[], metavar="JSONL",
                   help="histories with tokens, used to resolve token IDs")
    p.add_argument("--thresholds", default="0:1:0.05")
    p.add_argument("--threshold", type=float, default=0.2)
    p.add_argument("--no-subset-rule", action="store_true")
    p.add_argument("--distribution", default=None, metavar="CSV", help="stratum weights from 'sample --unbounded'")
    p.add_argument("--draws", type=int, default=1000)
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("sample", help="stratified candidate pairs for labelling")
    _shared(p, corpus=True)
    p.add_argument("--bucket-size", type=int, default=125)
    p.add_argument("--unbounded", action="store_true", help="estimate the stratum distribution instead")
    p.add_argument("--max-attempts", type=int, default=200_000)
    p.add_argument("--max-pairs", type=int, default=100_000)
    p.add_argument("--similarity", choices=("jaccard", "cosine"), default="jaccard")
    p.set_defaults(handler=cmd_sample)
    return parser


def _subparser(parser: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def _apply_config(parser: argparse.ArgumentParser, args: argparse.Namespace) -> None:
    try:
        with open(args.config, encoding="utf-8") as fh:
            settings = parse_config(fh.read(), args.command)
    except OSError as exc:
        raise RefhistError(f"cannot read config {args.config}: {exc.strerror or exc}") from None
    actions = {a.dest: a for a in _subparser(parser, args.command)._actions}
    for key, value in settings.items():
        key = "inputs" if key == "in" else key
        if key in ("command", "config", "handler", "help") or key not in actions:
            raise UsageError(f"{args.config}: unknown setting {key!r} for {args.command}")
        action = actions[key]
        try:
            if isinstance(action, argparse._AppendAction):
                value = [str(v) for v in value] if isinstance(value, (list, tuple)) else [str(value)]
            elif isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
                if not isinstance(value, bool):
                    raise ValueError("expected true or false")
            else:
                if isinstance(value, (list, tuple)):
                    value = ",".join(map(str, value))
                if action.type is not None and not isinstance(value, (bool, datetime)):
                    value = action.type(str(value)) if action.type is not int or not isinstance(value, int) else value
                elif action.type is None and not isinstance(value, str):
                    value = str(value)
                if action.choices is not None and value not in action.choices:
                    raise ValueError(f"choose from {', '.join(map(str, action.choices))}")
        except (ValueError, TypeError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"{args.config}: bad value for {key!r}: {exc}") from None
        setattr(args, key, value)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.config:
            _apply_config(parser, args)
        if not args.inputs and args.command != "evaluate":
            raise UsageError(f"refhist {args.command}: --in is required")
        _need(args, "out", "--out")
        if args.jobs < 1:
            raise UsageError("--jobs must be at least 1")
        if args.command in ("ingest", "histories", "sample"):
            for path in args.inputs:
                _infer_format(path, args.format)
        args.handler(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (RefhistError, OSError, ValueError) as exc:
        print(f"refhist: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
