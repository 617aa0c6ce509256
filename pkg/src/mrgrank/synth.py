"""Deterministic synthetic microblog corpus with a planted salient subset.

Produces posts.jsonl / users.jsonl / config.json plus a planted.json manifest
listing which item ids were given inflated engagement.  Everything is driven
by a single seed so repeated generation is byte-identical.
"""
from __future__ import annotations

import json
import os

import numpy as np

SALIENT_VOCAB = ["quake%d" % i for i in range(20)]
GENERIC_VOCAB = ["word%03d" % i for i in range(200)]


def generate_corpus(n_posts=500, n_users=60, n_hashtags=40, n_planted=10, seed=7):
    """Return (posts, users, planted) as plain dicts/lists.

    The first ``n_planted`` items of each kind are the planted salient set:
    high retweet counts, dense follower lists, heavy hashtag usage, and a
    shared vocabulary so the planted posts also cluster by text similarity.
    """
    rng = np.random.default_rng(seed)
    n_planted = min(n_planted, n_posts, n_users, n_hashtags)
    user_ids = ["u%03d" % i for i in range(n_users)]
    tags = ["tag%02d" % i for i in range(n_hashtags)]
    planted_users = user_ids[:n_planted]
    planted_tags = tags[:n_planted]

    users = []
    for i, uid in enumerate(user_ids):
        if i < n_planted:
            n_fol = int(rng.integers(35, 50))
        else:
            n_fol = int(rng.integers(0, 5))
        pool = [u for u in user_ids if u != uid]
        followers = list(rng.choice(pool, size=min(n_fol, len(pool)), replace=False))
        users.append({
            "id": uid,
            "handle": "@%s" % uid,
            "followers": followers,
            "follower_count": (1500 + int(rng.integers(0, 800))) if i < n_planted
                              else len(followers),
        })

    posts = []
    for i in range(n_posts):
        pid = "p%04d" % i
        if i < n_planted:
            author = planted_users[i % n_planted]
            retweets = 3000 + int(rng.integers(0, 3000))
            k = int(rng.integers(2, 4))
            post_tags = list(rng.choice(planted_tags, size=k, replace=False))
            words = rng.choice(SALIENT_VOCAB, size=8, replace=True)
        else:
            author = user_ids[int(rng.integers(0, n_users))]
            retweets = int(rng.integers(0, 6))
            post_tags = []
            # planted hashtags keep showing up in background chatter, which is
            # what makes their usage counts dominate
            if rng.random() < 0.6:
                post_tags.append(str(rng.choice(planted_tags)))
            if len(tags) > n_planted and rng.random() < 0.35:
                post_tags.append(str(rng.choice(tags[n_planted:])))
            words = rng.choice(GENERIC_VOCAB, size=8, replace=True)
        posts.append({
            "id": pid,
            "author_id": author,
            "text": " ".join(str(w) for w in words),
            "hashtags": post_tags,
            "timestamp": 1700000000 + 60 * i,
            "retweet_count": retweets,
        })

    planted = {
        "post": ["p%04d" % i for i in range(n_planted)],
        "user": planted_users,
        "hashtag": ["tag:" + t for t in planted_tags],
    }
    return posts, users, planted


def default_config(seed=7):
    return {
        "d": 0.85,
        "walks_per_node": 1000,
        "max_walk_length": 100,
        "rng_seed": seed,
        "variance_estimator": "poisson",
        "alpha": {
            "pp": 0.5, "uu": 0.5, "hh": 0.5,
            "pu": 0.25, "up": 0.25, "ph": 0.25,
            "hp": 0.25, "uh": 0.25, "hu": 0.25,
        },
        "tau_sim": 0.2,
    }


def write_corpus(out_dir, n_posts=500, n_users=60, n_hashtags=40,
                 n_planted=10, seed=7):
    """Write the bundled corpus files into ``out_dir`` and return planted ids."""
    os.makedirs(out_dir, exist_ok=True)
    posts, users, planted = generate_corpus(n_posts, n_users, n_hashtags,
                                            n_planted, seed)
    with open(os.path.join(out_dir, "posts.jsonl"), "w") as f:
        for p in posts:
            f.write(json.dumps(p, sort_keys=True) + "\n")
    with open(os.path.join(out_dir, "users.jsonl"), "w") as f:
        for u in users:
            f.write(json.dumps(u, sort_keys=True) + "\n")
    with open(os.path.join(out_dir, "config.json"), "w") as f:
        json.dump(default_config(seed), f, indent=2, sort_keys=True)
    with open(os.path.join(out_dir, "planted.json"), "w") as f:
        json.dump(planted, f, indent=2, sort_keys=True)
    return planted
