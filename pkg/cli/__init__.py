"""Command-line pipeline: ingest, preprocess, train, ensemble, evaluate, analyze."""
