"""Test suite for cranlab."""
