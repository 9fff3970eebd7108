"""Dataset file parsers"""
