"""Domain services: cohorts, pairs, comparators, inference, metrics and baselines."""
