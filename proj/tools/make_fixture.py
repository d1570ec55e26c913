#!/usr/bin/env python3
"""Regenerates the small English fixture under tests/fixtures.

Posts and claims are invented from templates. Vectors are hashed
bag-of-words counts, so near-duplicate posts land close together and
unrelated posts do not. Output is deterministic.

    python3 tools/make_fixture.py tests/fixtures
"""

import csv
import hashlib
import json
import random
import re
import sys
from pathlib import Path

MODEL = "sentence-transformers/msmarco-distilbert-base-v3"
DIM = 256
STOP = {"the", "a", "in", "is", "of", "this", "at", "now", "to", "it", "before", "gets", "rt", "share", "look",
        "wow", "breaking", "news", "nobody", "talking", "about", "unbelievable", "repost"}

SUBJECTS = [
    ("the city council", "The city council"),
    ("a viral video", "A viral video"),
    ("the health ministry", "The health ministry"),
    ("local farmers", "Local farmers"),
    ("the central bank", "The central bank"),
    ("a famous actor", "A famous actor"),
    ("the school board", "The school board"),
    ("a new study", "A new study"),
    ("the football club", "The football club"),
    ("the airport", "The airport"),
]
ACTIONS = [
    ("banned {x}", "banned {x}"),
    ("secretly approved {x}", "approved {x}"),
    ("is giving away {x}", "is giving away {x}"),
    ("confirmed a shortage of {x}", "confirmed a shortage of {x}"),
    ("will tax {x}", "will introduce a tax on {x}"),
    ("found poison in {x}", "found toxic substances in {x}"),
]
OBJECTS = [
    "bottled water", "electric scooters", "free vaccines", "imported rice", "mobile phones",
    "cash payments", "solar panels", "public parks", "street food", "train tickets",
    "garden hoses", "school lunches",
]
PLACES = ["Lisbon", "Nairobi", "Toronto", "Osaka", "Lima", "Krakow", "Perth", "Dakar"]
OPENERS = ["BREAKING:", "Wow.", "Unbelievable!!!", "Look at this.", "Nobody is talking about this:", "Share now!"]
CLOSERS = ["#truth", "#news", "Share before it gets deleted!", "RT RT RT", "https://example.org/p/{n}", "😡😡"]


def make_pair(rng, n):
    subj, subj_cap = rng.choice(SUBJECTS)
    action, claim_action = rng.choice(ACTIONS)
    obj = rng.choice(OBJECTS)
    place = rng.choice(PLACES)
    post = f"{rng.choice(OPENERS)} {subj} in {place} {action.format(x=obj)} {rng.choice(CLOSERS).format(n=n)}"
    claim = f"{subj_cap} in {place} {claim_action.format(x=obj)}."
    return post, claim


def near_duplicate(rng, post):
    edits = [
        lambda p: p + " #wakeup",
        lambda p: p.replace("BREAKING:", "breaking news:") + " insiders confirm",
        lambda p: p.upper() + " #FAKE #MEDIA",
        lambda p: "Repost from my cousin: " + p,
        lambda p: p + " RT",
    ]
    return rng.choice(edits)(post)


def tokens(text):
    return [t for t in re.split(r"[^\w#@]+", text.lower()) if t]


def embed(text):
    vec = [0.0] * DIM
    for tok in tokens(text):
        if tok in STOP:
            continue
        h = hashlib.sha256(tok.encode()).digest()
        idx = h[0] % DIM
        vec[idx] += 1.0 if h[1] & 1 else -1.0
    if all(v == 0.0 for v in vec):
        vec[0] = 1.0
    return vec


def write_csv(path, rows, with_gold):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["post", "normalized claim"] if with_gold else ["post"])
        for post, claim in rows:
            w.writerow([post, claim] if with_gold else [post])


def main(out_dir):
    rng = random.Random(20250101)
    seen = set()
    pairs = []
    n = 0
    while len(pairs) < 52:
        post, claim = make_pair(rng, n)
        n += 1
        if post in seen:
            continue
        seen.add(post)
        pairs.append((post, claim))

    train, dev, fresh = pairs[:30], pairs[30:40], pairs[40:52]
    pooled = train + dev

    # Test split: one exact duplicate, seven near-duplicates of pooled posts,
    # and twelve fresh posts, shuffled.
    test = []
    sources = rng.sample(range(len(pooled)), 8)
    test.append(pooled[sources[0]])
    for i in sources[1:]:
        post, claim = pooled[i]
        test.append((near_duplicate(rng, post), claim))
    test.extend(fresh)
    rng.shuffle(test)

    lang_dir = Path(out_dir) / "eng"
    lang_dir.mkdir(parents=True, exist_ok=True)
    write_csv(lang_dir / "train.csv", train, True)
    write_csv(lang_dir / "dev.csv", dev, True)
    write_csv(lang_dir / "test.csv", test, True)

    texts = []
    for post, _ in pooled + test:
        if post not in texts:
            texts.append(post)
    with open(Path(out_dir) / "eng" / "vectors.jsonl", "w", encoding="utf-8") as f:
        for text in texts:
            rec = {
                "model": MODEL,
                "sha256": hashlib.sha256(text.encode("utf-8")).hexdigest(),
                "vector": embed(text),
            }
            f.write(json.dumps(rec) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "tests/fixtures")
