# Test package for the fingerprint verification toolkit
