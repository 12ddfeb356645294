//! Reverse-mode differentiation over complex tensors and the Adam optimizer.

mod optim;
mod tape;

pub use optim::{Adam, AdamConfig, Param, ParamSet};
pub use tape::{CTensor, Gradients, Tape, Var};

use crate::error::Error;
use crate::graph::TermAlgebra;

/// Runs a basis recurrence on tape nodes: `apply` multiplies by a node-mixing
/// matrix held on the same tape.
pub(crate) struct TapeAlgebra<'a> {
    pub tape: &'a mut Tape,
    pub matrix: Var,
    pub error: Option<Error>,
}

impl<'a> TapeAlgebra<'a> {
    pub fn new(tape: &'a mut Tape, matrix: Var) -> Self {
        Self { tape, matrix, error: None }
    }

    fn record(&mut self, r: crate::Result<Var>, fallback: Var) -> Var {
        match r {
            Ok(v) => v,
            Err(e) => {
                self.error.get_or_insert(e);
                fallback
            }
        }
    }
}

impl TermAlgebra for TapeAlgebra<'_> {
    type V = Var;

    fn apply(&mut self, v: &Var) -> Var {
        let r = self.tape.node_mix(self.matrix, *v);
        self.record(r, *v)
    }

    fn combine(&mut self, terms: &[(f64, &Var)]) -> Var {
        let owned: Vec<(f64, Var)> = terms.iter().map(|(c, v)| (*c, **v)).collect();
        let r = self.tape.combine(&owned);
        self.record(r, *terms[0].1)
    }
}
