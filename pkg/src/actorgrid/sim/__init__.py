"""Smart-grid scenario harness built on the actor runtime."""
