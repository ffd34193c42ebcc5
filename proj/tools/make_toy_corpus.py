#!/usr/bin/env python3
"""Writes the bundled toy corpus: small Java methods with method names whose
subtokens are shared with the body to a controlled degree (0, 1, 2, 3, >=4).

    python3 tools/make_toy_corpus.py --out data/toy_corpus.jsonl
"""

import argparse
import collections
import json
import random
import re

NOUNS = [
    "user", "account", "order", "item", "price", "name", "file", "path", "buffer", "cache",
    "token", "message", "status", "session", "config", "request", "event", "node", "record",
    "amount", "balance", "address", "email", "customer", "product", "task", "report", "score",
    "channel", "page", "entry", "header", "payment", "invoice", "ticket", "profile",
]
QUALIFIERS = ["max", "min", "current", "last", "first", "default", "total", "pending"]
VERBS = ["load", "save", "update", "remove", "add", "create", "find", "send", "validate", "parse",
         "register", "format", "fetch", "refresh", "archive", "publish"]
STATES = ["empty", "valid", "active", "closed", "ready", "enabled", "expired", "locked"]
PLAIN = ["reset", "clear", "close", "start", "stop", "run", "init", "flush", "dispose", "shutdown"]
NOISE = ["result", "tmp", "ctx", "helper", "util", "out", "obj", "data", "count", "size"]
TYPES = {"amount": "double", "price": "double", "balance": "double", "score": "int",
         "status": "Status", "email": "String", "name": "String", "path": "String",
         "address": "String", "token": "String", "message": "String", "header": "String"}
SERVICES = ["repository", "service", "store", "client", "manager", "registry", "dao", "gateway"]
# Verb synonyms that keep the verb itself out of the body.
SYNONYM = {"load": "read", "save": "persist", "update": "modify", "remove": "delete",
           "add": "insert", "create": "make", "find": "lookup", "send": "dispatch",
           "validate": "check", "parse": "decode", "register": "bind", "format": "render",
           "fetch": "pull", "refresh": "reload", "archive": "store", "publish": "emit"}


def camel(words, upper_first=False):
    out = "".join(w[:1].upper() + w[1:] for w in words)
    return out if upper_first else out[:1].lower() + out[1:]


def type_of(noun):
    return TYPES.get(noun, noun[:1].upper() + noun[1:])


class Gen:
    def __init__(self, rng):
        self.r = rng

    def noise_stmt(self):
        n = self.r.choice(NOISE)
        svc = self.r.choice(SERVICES)
        forms = [
            f"Object {n} = ctx.lookup(\"{n}\");",
            f"int {n} = 0;",
            f"log.debug(\"{n}\");",
            f"helper.touch({n});",
            f"if ({svc} == null) {{ throw new IllegalStateException(\"{svc}\"); }}",
        ]
        return self.r.choice(forms)

    def maybe_noise(self, p=0.5):
        return [self.noise_stmt()] if self.r.random() < p else []

    def other_nouns(self, exclude, k):
        pool = [n for n in NOUNS if n not in exclude]
        return self.r.sample(pool, k)

    # bucket = number of name subtokens in the body
    def getter(self, bucket):
        words = self.field_words(bucket)
        name = ["get"] + words
        field = camel(words)
        t = type_of(words[-1])
        if bucket == 0:
            other = camel(self.other_nouns(words, 1))
            body = [f"return {other};"]
        else:
            body = self.r.choice([
                [f"return {field};"],
                [f"return this.{field};"],
                [f"if ({field} == null) {{ {field} = ctx.lookup(\"{field}\"); }}", f"return {field};"],
                [f"return {field} != null ? {field} : {camel(self.other_nouns(words, 1))};"],
            ])
        return name, f"{t} {camel(name)}() {{ {' '.join(self.maybe_noise(0.3) + body)} }}"

    def setter(self, bucket):
        words = self.field_words(bucket)
        name = ["set"] + words
        t = type_of(words[-1])
        field = camel(words)
        param = field if bucket else "v"
        target = field if bucket else camel(self.other_nouns(words, 1))
        params = [f"{t} {param}"]
        body = [f"this.{target} = {param};"]
        if bucket and self.r.random() < 0.6:
            # a second field set the same way
            other = self.other_nouns(words, 1)[0]
            pos = self.r.randrange(2)
            params.insert(pos, f"{type_of(other)} {other}")
            body.insert(pos, f"this.{other} = {other};")
        body = self.maybe_noise(0.3) + body
        if self.r.random() < 0.4:
            body.append("changed = true;")
        return name, f"void {camel(name)}({', '.join(params)}) {{ {' '.join(body)} }}"

    def field_words(self, n):
        n = max(n, 1)
        if n == 1:
            return [self.r.choice(NOUNS)]
        if n == 2:
            return self.r.choice([[self.r.choice(QUALIFIERS), self.r.choice(NOUNS)], self.r.sample(NOUNS, 2)])
        return [self.r.choice(QUALIFIERS)] + self.r.sample(NOUNS, n - 1)

    def predicate(self, bucket):
        state = self.r.choice(STATES)
        lead = self.r.choice(["is", "has"]) if bucket == 0 else "is"
        if lead == "has":
            noun = self.r.choice(NOUNS)
            name = ["has", noun]
            other = camel(self.other_nouns([noun], 1))
            body = [f"return {other}Count > 0;"]
            return name, f"boolean {camel(name)}() {{ {' '.join(self.maybe_noise(0.3) + body)} }}"
        name = ["is", state]
        if bucket == 0:
            other = self.r.choice(NOISE)
            body = [f"return {other} == 0;"]
        else:
            holder = self.r.choice(["this.", ""])
            body = [f"return {holder}{state};"]
        return name, f"boolean {camel(name)}() {{ {' '.join(self.maybe_noise(0.3) + body)} }}"

    def action(self, bucket):
        # verb + nouns; `bucket` of them (verb first) appear in the body
        n_nouns = max(1, bucket - 1) if bucket >= 2 else self.r.choice([1, 2])
        verb = self.r.choice(VERBS)
        nouns = self.r.sample(NOUNS, n_nouns)
        name = [verb] + nouns
        svc = self.r.choice(SERVICES)
        in_body_verb = bucket >= 2 or (bucket == 1 and self.r.random() < 0.5)
        shown = bucket - (1 if in_body_verb else 0)
        shown_nouns = nouns[:shown]
        hidden = [camel(self.other_nouns(nouns, 1)) for _ in nouns[shown:]]
        call_verb = verb if in_body_verb else SYNONYM[verb]
        args = shown_nouns + hidden
        if self.r.random() < 0.6:
            args.insert(self.r.randrange(len(args) + 1), self.other_nouns(nouns, 1)[0])
        params = ", ".join(f"{type_of(a if a in NOUNS else a)} {a}" for a in args)
        stmts = self.maybe_noise(0.6)
        if shown_nouns and self.r.random() < 0.5:
            stmts.append(f"{svc}.{call_verb}({', '.join(args)});")
        else:
            target = camel([svc] + ([nouns[0]] if shown_nouns and len(shown_nouns) > 1 else []))
            stmts.append(f"{target}.{call_verb}({', '.join(args)});")
        if self.r.random() < 0.5:
            stmts.append(self.noise_stmt())
        return name, f"void {camel(name)}({params}) {{ {' '.join(stmts)} }}"

    def aggregate(self, bucket):
        # compute/count/sum over a collection
        verb = self.r.choice(["compute", "sum", "count"])
        nouns = self.r.sample(NOUNS, 2)
        name = [verb] + nouns
        elem, prop = nouns
        items = elem + "s"
        coll = f"List<{type_of(elem)}> {items}"
        if bucket >= 2:
            loop = f"for ({type_of(elem)} {elem} : {items}) {{ result += {elem}.get{prop.capitalize()}(); }}"
        elif bucket == 1:
            loop = f"for ({type_of(elem)} x : {items}) {{ result += x.weight(); }}"
            coll = f"List<{type_of(elem)}> {items}"
        else:
            coll = "List<Entry> rows"
            loop = "for (Entry x : rows) { result += x.weight(); }"
        if bucket >= 3:
            loop = loop.replace("result +=", f"{verb}Total +=")
        body = f"double result = 0; {loop} return result;"
        return name, f"double {camel(name)}({coll}) {{ {body} }}"

    def plain(self, bucket):
        verb = self.r.choice(PLAIN)
        name = [verb]
        others = self.r.sample(NOUNS, 2)
        stmts = [f"{camel([others[0]])}.clear();", f"{others[1]}Count = 0;"] if verb != "clear" else [
            f"{others[0]}.reset();", f"{others[1]}Count = 0;"]
        self.r.shuffle(stmts)
        if bucket >= 1:
            stmts.append(f"super.{verb}();")
        return name, f"void {camel(name)}() {{ {' '.join(self.maybe_noise(0.5) + stmts)} }}"

    def wide(self, bucket):
        # names with four or more subtokens, all visible in the body
        verb = self.r.choice(VERBS)
        q = self.r.choice(QUALIFIERS)
        nouns = self.r.sample(NOUNS, 2)
        name = [verb, q] + nouns
        a, b = nouns
        field = camel([q, a, b])
        stmts = [
            f"{type_of(a)} {a} = {a}Repository.{verb}({b}Id);",
            f"{field} = {a}.get{b.capitalize()}();",
        ]
        if self.r.random() < 0.5:
            stmts.append(self.noise_stmt())
        return name, f"void {camel(name)}(long {b}Id) {{ {' '.join(stmts)} }}"

    def make(self, bucket):
        if bucket == 0:
            kind = self.r.choice([self.getter, self.setter, self.predicate, self.plain, self.plain, self.action,
                                  self.aggregate])
        elif bucket == 1:
            kind = self.r.choice([self.getter, self.setter, self.predicate, self.action, self.aggregate, self.plain])
        elif bucket == 2:
            kind = self.r.choice([self.getter, self.setter, self.action, self.aggregate])
        elif bucket == 3:
            kind = self.r.choice([self.getter, self.setter, self.action, self.aggregate])
        else:
            kind = self.wide
        return kind(bucket)


def split_words(identifier):
    return [w.lower() for w in re.findall(r"[A-Z]+(?![a-z])|[A-Z]?[a-z]+|\d+", identifier)]


def body_word_list(body, declared):
    words = []
    for ident in re.findall(r"[A-Za-z_][A-Za-z0-9_]*", re.sub(r'"[^"]*"', '""', body)):
        if ident != declared:
            words.extend(split_words(ident))
    return words


def body_words(body, declared):
    return set(body_word_list(body, declared))


def unreachable(row, counts, min_count):
    """Name subtokens a decoder could neither copy from the body nor find in
    a vocabulary built from the training split."""
    body = body_words(row["body"], camel(row["name_subtokens"]))
    return [w for w in row["name_subtokens"] if w not in body and counts[w] < min_count]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data/toy_corpus.jsonl")
    ap.add_argument("--seed", type=int, default=20231)
    ap.add_argument("--projects", type=int, default=24)
    ap.add_argument("--per-project", type=int, default=10)
    ap.add_argument("--min-count", type=int, default=5)
    args = ap.parse_args()

    rng = random.Random(args.seed)
    gen = Gen(rng)
    weights = [0.15, 0.25, 0.30, 0.18, 0.12]
    rows = []
    for p in range(args.projects):
        project = f"proj{p:02d}"
        split = "train" if p < args.projects - 9 else ("valid" if p < args.projects - 6 else "test")
        for m in range(args.per_project):
            bucket = rng.choices(range(5), weights)[0]
            name, body = gen.make(bucket)
            rows.append({"id": f"{project}.m{m:02d}", "project": project, "split": split,
                         "name_subtokens": name, "body": body, "_bucket": bucket})

    # Regenerate methods whose names cannot be produced at all.
    for _ in range(100):
        counts = collections.Counter()
        for r in rows:
            if r["split"] == "train":
                counts.update(body_word_list(r["body"], camel(r["name_subtokens"])))
                counts.update(r["name_subtokens"])
        bad = [r for r in rows if unreachable(r, counts, args.min_count)]
        if not bad:
            break
        for r in bad:
            r["name_subtokens"], r["body"] = gen.make(r["_bucket"])
    else:
        raise SystemExit("could not make every name reachable")

    hist = collections.Counter(
        min(len(set(r["name_subtokens"]) & body_words(r["body"], camel(r["name_subtokens"]))), 4) for r in rows)
    with open(args.out, "w") as f:
        for r in rows:
            r.pop("_bucket")
            f.write(json.dumps(r) + "\n")
    print(f"{len(rows)} methods; shared-token buckets " + ", ".join(f"{b}:{hist[b]}" for b in range(5)))


if __name__ == "__main__":
    main()
