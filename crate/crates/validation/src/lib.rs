//! Holds the `acceptance` test target; run it with
//! `cargo test -p fence-validation --test acceptance`.
