//! Library surface of the CLI (placeholder while the core builds).

pub fn run() -> i32 {
    0
}
