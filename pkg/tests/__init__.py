"""Test suite for romfdtd"""
