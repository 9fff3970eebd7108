"""Experiment runners for the incremental learning protocols"""
