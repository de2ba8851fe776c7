//! Test functions h: state -> R^d.

/// A deterministic, total map from states to `R^d`.
pub trait TestFunction<S>: Send + Sync {
    fn arity(&self) -> usize;

    fn eval_into(&self, state: &S, out: &mut [f64]);

    fn eval(&self, state: &S) -> Vec<f64> {
        let mut out = vec![0.0; self.arity()];
        self.eval_into(state, &mut out);
        out
    }

    /// First coordinate; convenient for scalar test functions.
    fn eval_scalar(&self, state: &S) -> f64 {
        if self.arity() == 1 {
            let mut out = [0.0];
            self.eval_into(state, &mut out);
            out[0]
        } else {
            self.eval(state)[0]
        }
    }
}

impl<S, T: TestFunction<S> + ?Sized> TestFunction<S> for Box<T> {
    fn arity(&self) -> usize {
        (**self).arity()
    }
    fn eval_into(&self, state: &S, out: &mut [f64]) {
        (**self).eval_into(state, out)
    }
}

impl<S, T: TestFunction<S> + ?Sized> TestFunction<S> for &T {
    fn arity(&self) -> usize {
        (**self).arity()
    }
    fn eval_into(&self, state: &S, out: &mut [f64]) {
        (**self).eval_into(state, out)
    }
}

/// h(x) = x.
#[derive(Clone, Copy, Debug, Default)]
pub struct Identity;

impl TestFunction<f64> for Identity {
    fn arity(&self) -> usize {
        1
    }
    fn eval_into(&self, x: &f64, out: &mut [f64]) {
        out[0] = *x;
    }
}

/// h(x) = (x^p_1, ..., x^p_d).
#[derive(Clone, Debug)]
pub struct Powers(pub Vec<i32>);

impl TestFunction<f64> for Powers {
    fn arity(&self) -> usize {
        self.0.len()
    }
    fn eval_into(&self, x: &f64, out: &mut [f64]) {
        for (o, p) in out.iter_mut().zip(&self.0) {
            *o = x.powi(*p);
        }
    }
}

/// A constant vector, for any state space.
#[derive(Clone, Debug)]
pub struct Constant(pub Vec<f64>);

impl<S> TestFunction<S> for Constant {
    fn arity(&self) -> usize {
        self.0.len()
    }
    fn eval_into(&self, _state: &S, out: &mut [f64]) {
        out.copy_from_slice(&self.0);
    }
}

/// Table lookup on finite state spaces: row `s` holds h(s).
#[derive(Clone, Debug)]
pub struct StateTable {
    values: Vec<f64>,
    arity: usize,
}

impl StateTable {
    /// `values` is row-major, `n_states × arity`.
    pub fn new(values: Vec<f64>, arity: usize) -> Self {
        assert!(arity >= 1 && values.len() % arity == 0);
        StateTable { values, arity }
    }

    pub fn scalar(values: Vec<f64>) -> Self {
        StateTable::new(values, 1)
    }

    pub fn n_states(&self) -> usize {
        self.values.len() / self.arity
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.arity..(s + 1) * self.arity]
    }

    /// Single column `j` as a scalar table.
    pub fn column(&self, j: usize) -> StateTable {
        StateTable::scalar((0..self.n_states()).map(|s| self.row(s)[j]).collect())
    }
}

impl TestFunction<usize> for StateTable {
    fn arity(&self) -> usize {
        self.arity
    }
    fn eval_into(&self, s: &usize, out: &mut [f64]) {
        out.copy_from_slice(self.row(*s));
    }
}

/// Scalar test function from a closure.
pub struct ScalarFn<F>(pub F);

impl<S, F: Fn(&S) -> f64 + Send + Sync> TestFunction<S> for ScalarFn<F> {
    fn arity(&self) -> usize {
        1
    }
    fn eval_into(&self, state: &S, out: &mut [f64]) {
        out[0] = (self.0)(state);
    }
}
