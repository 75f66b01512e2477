"""scg-emotion core subpackage."""
