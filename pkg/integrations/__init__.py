"""
Integrations module - web providers (search, WHOIS, page fetch, DNS) and fixtures.
"""
