"""scg-emotion ui subpackage."""
