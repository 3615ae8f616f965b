//! Nested-loop solver for the O(n) loop model on random quadrangulations.

pub mod elliptic;
pub mod enumerate;
pub mod fredholm;
pub mod maps;
pub mod nested;
pub mod quad;
pub mod rigid;
pub mod rings;
pub mod series;
