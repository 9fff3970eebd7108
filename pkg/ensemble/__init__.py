"""Learn++ incremental ensemble"""
