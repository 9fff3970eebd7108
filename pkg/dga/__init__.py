"""DGA records, features and synthetic data generation"""
