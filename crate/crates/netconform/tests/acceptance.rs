//! End-to-end statistical acceptance checks (filled in incrementally).
