//! Uniform view over "partition + monotone branches" systems, so the axiom
//! checks and transfer operators run unchanged on a raw map and on its
//! first-return system.

use crate::error::Result;
use crate::interval::Interval;
use crate::maps::PiecewiseMap;

pub trait MarkovSystem: Sync {
    /// Phase space of the system (`[0, 1]`, or the inducing set).
    fn space(&self) -> Interval;

    /// Number of resolved partition elements.
    fn element_count(&self) -> usize;

    fn element(&self, i: usize) -> Interval;

    fn element_image(&self, i: usize) -> Interval;

    fn element_label(&self, i: usize) -> String;

    /// Branch formula of element `i`, valid on its closure.
    fn forward(&self, i: usize, x: f64) -> f64;

    fn derivative(&self, i: usize, x: f64) -> f64;

    fn inverse(&self, i: usize, y: f64) -> Result<f64>;

    /// Index of the element containing `x`, if resolved.
    fn element_of(&self, x: f64) -> Option<usize>;

    /// Preimages of the sorted points `ys` under every element, together with
    /// the branch derivative at each preimage. Points outside an element's
    /// image are skipped; `f` receives `(element, indices into ys, preimages,
    /// derivatives)`.
    fn for_each_preimage_set(&self, ys: &[f64], f: &mut dyn FnMut(usize, &[usize], &[f64], &[f64])) -> Result<()> {
        for i in 0..self.element_count() {
            let img = self.element_image(i);
            let mut idx = Vec::new();
            let mut pre = Vec::new();
            let mut der = Vec::new();
            for (j, &y) in ys.iter().enumerate() {
                if img.contains_approx(y, 0.0) {
                    let x = self.inverse(i, y)?;
                    idx.push(j);
                    pre.push(x);
                    der.push(self.derivative(i, x));
                }
            }
            f(i, &idx, &pre, &der);
        }
        Ok(())
    }

    /// Lebesgue mass of the space not covered by resolved elements.
    fn unresolved_mass(&self) -> f64 {
        0.0
    }

    fn describe(&self) -> String;
}

impl MarkovSystem for PiecewiseMap {
    fn space(&self) -> Interval {
        Interval::UNIT
    }

    fn element_count(&self) -> usize {
        self.len()
    }

    fn element(&self, i: usize) -> Interval {
        *self.branch(i).domain()
    }

    fn element_image(&self, i: usize) -> Interval {
        *self.branch(i).image()
    }

    fn element_label(&self, i: usize) -> String {
        self.label(i).to_string()
    }

    fn forward(&self, i: usize, x: f64) -> f64 {
        self.branch(i).forward(x)
    }

    fn derivative(&self, i: usize, x: f64) -> f64 {
        self.branch(i).derivative(x)
    }

    fn inverse(&self, i: usize, y: f64) -> Result<f64> {
        self.branch(i).inverse(y)
    }

    fn element_of(&self, x: f64) -> Option<usize> {
        self.locate(x).ok()
    }

    fn describe(&self) -> String {
        self.name().to_string()
    }
}
