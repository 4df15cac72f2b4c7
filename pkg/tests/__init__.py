"""
Test suite for factual.
"""
