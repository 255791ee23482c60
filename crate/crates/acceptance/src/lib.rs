//! Holds no code. The checks live in `tests/acceptance.rs` and run with
//! `cargo test -p liverkg-acceptance --test acceptance`.
