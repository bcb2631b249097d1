"""
Services module - extraction, experiment pipelines, run bookkeeping.
"""
