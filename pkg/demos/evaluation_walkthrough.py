"""
Evaluating recommendations by scenario
======================================

Split a simulated corpus per user, train on the training part, and score
held-out check-ins separately for home-town and out-of-town visits.
"""

from lsars import (
    HyperParams,
    Scenario,
    evaluate_items,
    evaluate_users,
    generate_corpus,
    random_truth,
    split_train_test,
    train,
)

###############################################################################
# Regions are scattered over the globe, so many users travel more than
# 100 km from their home location.

truth = random_truth(80, 30, K=6, R=4, n_items=150, W=60, C=60, seed=4)
corpus, _ = generate_corpus(truth, seed=5)
train_corpus, test_records = split_train_test(corpus, 0.7, seed=6)
print(f"train {len(train_corpus)} / test {len(test_records)} check-ins")

model = train(train_corpus, HyperParams(K=6, R=4, iterations=150, seed=7))

###############################################################################
# Accuracy@k ranks the held-out item against every item the user did not
# visit in training, querying from the held-out item's location.

for scenario in (None, Scenario.HOME_TOWN, Scenario.OUT_OF_TOWN):
    report = evaluate_items(model, test_records, ks=(1, 10, 20), scenario=scenario)
    print(report.to_text())

###############################################################################
# Precision@k for user discovery: for each held-out item, how many of the top
# ranked users actually checked in there.

print(evaluate_users(model, test_records, ks=(1, 5, 10)).to_text())

###############################################################################
# Every metric can be recomputed from the per-case table.

report = evaluate_items(model, test_records)
print(report.cases_csv().splitlines()[:4])
