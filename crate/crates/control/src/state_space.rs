use nalgebra::DMatrix;

use crate::{ensure_finite, matrix_exponential, ControlError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeDomain {
    Continuous,
    /// Sampled with the given step in seconds.
    Discrete { step: f64 },
}

impl TimeDomain {
    pub fn step(&self) -> Option<f64> {
        match self {
            TimeDomain::Continuous => None,
            TimeDomain::Discrete { step } => Some(*step),
        }
    }
}

/// A real state-space realization `(A, B, C, D)`.
///
/// Fields are private so that the dimension invariants hold for every
/// value of this type.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
    domain: TimeDomain,
}

impl StateSpace {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        domain: TimeDomain,
    ) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(ControlError::Dimension(format!(
                "A must be square, got {}x{}",
                n,
                a.ncols()
            )));
        }
        if b.nrows() != n {
            return Err(ControlError::Dimension(format!(
                "B has {} rows, expected {n}",
                b.nrows()
            )));
        }
        if c.ncols() != n {
            return Err(ControlError::Dimension(format!(
                "C has {} columns, expected {n}",
                c.ncols()
            )));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(ControlError::Dimension(format!(
                "D is {}x{}, expected {}x{}",
                d.nrows(),
                d.ncols(),
                c.nrows(),
                b.ncols()
            )));
        }
        if let TimeDomain::Discrete { step } = domain {
            if !(step > 0.0 && step.is_finite()) {
                return Err(ControlError::Parameter(format!(
                    "discrete step must be positive, got {step}"
                )));
            }
        }
        for (m, name) in [(&a, "A"), (&b, "B"), (&c, "C"), (&d, "D")] {
            ensure_finite(m, name)?;
        }
        Ok(Self { a, b, c, d, domain })
    }

    /// A static gain `D` with no states.
    pub fn gain(d: DMatrix<f64>, domain: TimeDomain) -> Result<Self> {
        let (p, m) = d.shape();
        Self::new(
            DMatrix::zeros(0, 0),
            DMatrix::zeros(0, m),
            DMatrix::zeros(p, 0),
            d,
            domain,
        )
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }
    pub fn domain(&self) -> TimeDomain {
        self.domain
    }
    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }
    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }
    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn into_parts(self) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        (self.a, self.b, self.c, self.d)
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.d.iter().all(|v| *v == 0.0)
    }

    /// Keeps the listed input columns and output rows.
    pub fn select(&self, inputs: std::ops::Range<usize>, outputs: std::ops::Range<usize>) -> Self {
        let b = self.b.columns(inputs.start, inputs.len()).into_owned();
        let c = self.c.rows(outputs.start, outputs.len()).into_owned();
        let d = self
            .d
            .view((outputs.start, inputs.start), (outputs.len(), inputs.len()))
            .into_owned();
        Self {
            a: self.a.clone(),
            b,
            c,
            d,
            domain: self.domain,
        }
    }

    /// Kronecker product with the `k x k` identity: every scalar channel is
    /// replicated `k` times with no cross-coupling, states grouped per copy.
    pub fn replicate(&self, k: usize) -> Self {
        let ident = DMatrix::<f64>::identity(k, k);
        Self {
            a: ident.kronecker(&self.a),
            b: ident.kronecker(&self.b),
            c: ident.kronecker(&self.c),
            d: ident.kronecker(&self.d),
            domain: self.domain,
        }
    }
}

/// Zero-order-hold discretization with step `tau`.
///
/// `Ad = e^{A tau}` and `Bd = (int_0^tau e^{A s} ds) B`, both read off the
/// exponential of the augmented matrix `[[A, B], [0, 0]] * tau`.
pub fn discretize_zoh(sys: &StateSpace, tau: f64) -> Result<StateSpace> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(ControlError::Parameter(format!(
            "discretization step must be positive, got {tau}"
        )));
    }
    if sys.domain() != TimeDomain::Continuous {
        return Err(ControlError::InvalidInput(
            "discretize_zoh expects a continuous-time system".into(),
        ));
    }
    let n = sys.n_states();
    let m = sys.n_inputs();
    let mut aug = DMatrix::<f64>::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(sys.a() * tau));
    aug.view_mut((0, n), (n, m)).copy_from(&(sys.b() * tau));
    let e = matrix_exponential(&aug)?;
    let ad = e.view((0, 0), (n, n)).into_owned();
    let bd = e.view((0, n), (n, m)).into_owned();
    StateSpace::new(
        ad,
        bd,
        sys.c().clone(),
        sys.d().clone(),
        TimeDomain::Discrete { step: tau },
    )
}
