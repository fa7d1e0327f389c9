use std::fmt;
use std::sync::Arc;

pub type Mat3 = [[f64; 3]; 3];

type KernelFn = dyn Fn([f64; 3], [f64; 3]) -> Mat3 + Send + Sync;

/// Matrix-valued covariance kernel `k(x, x')` on the surface.
#[derive(Clone)]
pub struct MatrixKernel {
    name: String,
    amplitude: f64,
    length: f64,
    eval: Arc<KernelFn>,
}

impl fmt::Debug for MatrixKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MatrixKernel")
            .field("name", &self.name)
            .field("amplitude", &self.amplitude)
            .field("length", &self.length)
            .finish()
    }
}

impl MatrixKernel {
    pub fn new(
        name: impl Into<String>,
        amplitude: f64,
        length: f64,
        eval: impl Fn([f64; 3], [f64; 3]) -> Mat3 + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), amplitude, length, eval: Arc::new(eval) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    #[inline]
    pub fn eval(&self, x: [f64; 3], y: [f64; 3]) -> Mat3 {
        (self.eval)(x, y)
    }
}

/// `k(x, x') = a exp(-|x - x'|^2 / s) I_3`.
pub fn gaussian_kernel(amplitude: f64, length: f64) -> MatrixKernel {
    assert!(amplitude > 0.0 && length > 0.0, "kernel parameters must be positive");
    MatrixKernel::new("gaussian", amplitude, length, move |x, y| {
        let d2 = (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + (x[2] - y[2]).powi(2);
        let g = amplitude * (-d2 / length).exp();
        [[g, 0.0, 0.0], [0.0, g, 0.0], [0.0, 0.0, g]]
    })
}
