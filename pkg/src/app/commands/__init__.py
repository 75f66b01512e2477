"""scg-emotion command subpackage."""
