//! Recomputes published slot counts from published model coefficients.

use capplan::replay::{render, replay_all};

fn main() {
    let (text, ok) = render(&replay_all());
    print!("{text}");
    println!("{}", if ok { "all judged rows within tolerance" } else { "some rows out of tolerance" });
}
