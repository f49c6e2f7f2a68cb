//! Scoring a run against its recorded truth: detection statistics and
//! track accuracy.

#[cfg(test)]
mod tests {}
