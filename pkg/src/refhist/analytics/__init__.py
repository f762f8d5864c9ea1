"""Corpus statistics, editor profiles, clustering and rank comparison."""
