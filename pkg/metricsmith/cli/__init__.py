"""Command-line surface: run configs, CSV ingestion, report emission"""
