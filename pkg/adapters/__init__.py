"""Adapters: configuration files, output writers and the command line."""
