//! Holds the `acceptance` test target, which prints one PASS/FAIL line per
//! criterion and exits nonzero when any criterion fails:
//!
//! ```text
//! cargo test -p nsf-validation --test acceptance
//! ```
