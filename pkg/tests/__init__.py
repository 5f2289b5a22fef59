"""Test suite for the dynkinlab package."""
