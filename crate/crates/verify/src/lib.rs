//! Holds the `acceptance` test target only (`cargo test -p batchps-verify`).
//! It lives in its own package so that it runs after every other test
//! target of the workspace.
