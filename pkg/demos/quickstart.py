"""
Quickstart: train on check-ins, recommend items, discover users
================================================================

A tiny hand-written corpus is enough to walk through the whole API.
"""

# sphinx_gallery_thumbnail_number = 1
import tempfile
from pathlib import Path

import numpy as np

from lsars import (
    GeoPoint,
    HyperParams,
    ItemQuery,
    UserQuery,
    build_corpus,
    discover_users,
    load_model,
    recommend_items,
    save_model,
    train,
)

###############################################################################
# Each check-in is a user visiting an item (a venue) with the item's content
# words and the user's review words.  Two neighbourhoods roughly 300 km apart.

rows = []
venues = {
    "espresso_bar": (40.71, -74.00, ["coffee", "cafe"]),
    "ramen_house": (40.72, -73.99, ["noodles", "japanese"]),
    "art_museum": (40.78, -73.96, ["museum", "art"]),
    "harbour_cafe": (42.36, -71.05, ["coffee", "cafe", "harbour"]),
    "oyster_bar": (42.35, -71.06, ["seafood", "oysters"]),
}
visits = [
    ("ana", "espresso_bar", ["great", "coffee"]), ("ana", "ramen_house", ["delicious"]),
    ("ana", "espresso_bar", ["friendly"]), ("ben", "art_museum", ["beautiful"]),
    ("ben", "ramen_house", ["bland", "slow"]), ("ben", "oyster_bar", ["fresh", "great"]),
    ("cy", "harbour_cafe", ["cozy", "coffee"]), ("cy", "oyster_bar", ["fresh"]),
    ("cy", "harbour_cafe", ["good"]), ("ana", "harbour_cafe", ["lovely"]),
]
# repeat the visits so review words recur; with one mention each, sentiment
# labels are not identifiable and drift freely
for user, item, review in visits * 8:
    lat, lon, content = venues[item]
    rows.append({"user": user, "item": item, "lat": lat, "lon": lon,
                 "content_words": content, "review_words": review})
corpus = build_corpus(rows)
print(corpus.summary())

###############################################################################
# Fit a small model.  The callback sees the complete-data log posterior after
# every sweep, which is handy for eyeballing convergence.

trace = []
model = train(corpus, HyperParams(K=3, R=2, iterations=200, seed=0),
              callback=lambda it, lp: trace.append(lp))
print(f"log posterior: first {trace[0]:.1f}, last {trace[-1]:.1f}")

###############################################################################
# Models round-trip through a single self-describing file.

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "quickstart.lsars"
    save_model(model, path)
    assert load_model(path) == model

###############################################################################
# Recommend for ``ben`` standing in the harbour neighbourhood.  Items he
# already visited are excluded unless ``exclude_visited=False``.

ben = model.users.index_of("ben")
ranked = recommend_items(model, ItemQuery(ben, GeoPoint(42.36, -71.05), k=5),
                         exclude_visited=False)
for v, score in ranked:
    print(f"{model.items.token_of(v):>14s}  {score:.3e}")

###############################################################################
# Who is most likely to enjoy a new coffee place?  Unknown content words are
# dropped from ad-hoc queries.

query = UserQuery.adhoc(model, GeoPoint(40.70, -74.01), ["coffee", "cafe", "rooftop"], k=3)
for u, prob in discover_users(model, query):
    print(f"{model.users.token_of(u):>4s}  {prob:.4f}")

print("theta rows sum to", np.round(model.params.theta.sum(axis=1), 12))
