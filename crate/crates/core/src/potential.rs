//! Potentials `V(t, x)` entering the Hamiltonian `½p² + V`.

use crate::error::Result;
use crate::space::{GraphSpace, ScalarField};

#[derive(Clone, Debug, PartialEq)]
pub enum Potential {
    Zero,
    /// Time-independent `V(x)`.
    Static(ScalarField),
    /// `V(t, x) = profile(x) · cos(rate · t)`.
    Modulated { profile: ScalarField, rate: f64 },
}

impl Potential {
    pub fn at(&self, t: f64, n: usize) -> ScalarField {
        match self {
            Potential::Zero => ScalarField::zeros(n),
            Potential::Static(v) => v.clone(),
            Potential::Modulated { profile, rate } => profile * (rate * t).cos(),
        }
    }

    pub fn value(&self, t: f64, x: usize) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::Static(v) => v[x],
            Potential::Modulated { profile, rate } => profile[x] * (rate * t).cos(),
        }
    }

    pub fn is_static(&self) -> bool {
        !matches!(self, Potential::Modulated { rate, .. } if *rate != 0.0)
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Potential::Zero => true,
            Potential::Static(v) | Potential::Modulated { profile: v, .. } => v.iter().all(|&x| x == 0.0),
        }
    }

    /// The profile `V(0, ·)` bounding `|V(t, ·)|` for all `t`.
    fn envelope(&self) -> Option<&ScalarField> {
        match self {
            Potential::Zero => None,
            Potential::Static(v) | Potential::Modulated { profile: v, .. } => Some(v),
        }
    }

    /// `sup_{t,x} |V(t,x)|`.
    pub fn sup_abs(&self) -> f64 {
        self.envelope().map_or(0.0, |v| v.amax())
    }

    /// Upper bound on `sup_{t,x} V(t,x)`; exact for static potentials.
    pub fn sup(&self) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::Static(v) => v.max(),
            Potential::Modulated { profile, .. } => profile.amax(),
        }
    }

    /// Discrete spatial Lipschitz constant `max_edges |V(x) - V(y)| / ℓ(xy)`, uniform in `t`.
    pub fn lipschitz_constant(&self, space: &GraphSpace) -> f64 {
        let Some(v) = self.envelope() else { return 0.0 };
        space
            .edges()
            .iter()
            .map(|e| (v[e.tail] - v[e.head]).abs() / e.length)
            .fold(0.0, f64::max)
    }

    pub fn check(&self, space: &GraphSpace) -> Result<()> {
        if let Some(v) = self.envelope() {
            space.check_len(v)?;
            if v.iter().any(|x| !x.is_finite()) {
                return Err(crate::Error::InvalidArgument("potential has non-finite values".into()));
            }
        }
        Ok(())
    }
}

/// `amplitude · cos(2π k x / L)` sampled at the arc-length coordinates of a
/// builtin cycle or path, `L` being the total length.
pub fn cosine_profile(space: &GraphSpace, amplitude: f64, wavenumber: f64) -> ScalarField {
    let coords = space.uniform_coordinates();
    let period = space
        .edges()
        .iter()
        .map(|e| e.length)
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    ScalarField::from_fn(coords.len(), |x, _| {
        amplitude * (2.0 * std::f64::consts::PI * wavenumber * coords[x] / period).cos()
    })
}
