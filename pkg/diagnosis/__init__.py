"""Two-level bushing fault diagnosis and metrics"""
