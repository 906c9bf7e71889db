"""Record and weather ingestion, join validation, synthetic datasets."""
