"""Classifiers trained from scratch: MLP, RBF and SVM"""
