//! Constant-curvature model spaces and isometric-embedding checks.
//!
//! Spheres and hyperboloids are represented as loci `Q(x, x) = 1/kappa` in
//! an ambient `R^{p+1}`, with `Q` the Euclidean form on the sphere and the
//! Minkowski form `-x0*y0 + sum(xi*yi)` on the hyperboloid.
//!
//! For a distance matrix `D` the bilinear-form matrix is
//! `W_kappa(D) = cos(sqrt(kappa) D) / kappa` (entrywise) when `kappa != 0`
//! and the double-centred `-J (D∘D) J / 2` when `kappa == 0`. Its spectrum
//! decides embeddability. For `kappa < 0` the cosine continues to
//! `cosh(sqrt(-kappa) D)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{default_zero_tol, eigenvalues_sym, Signature, SymMatrix};

const LOCUS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    Euclidean,
    Spherical,
    Hyperbolic,
}

impl GeometryKind {
    pub const ALL: [GeometryKind; 3] = [GeometryKind::Euclidean, GeometryKind::Spherical, GeometryKind::Hyperbolic];

    pub fn curvature_sign_ok(self, kappa: f64) -> bool {
        match self {
            GeometryKind::Euclidean => kappa == 0.0,
            GeometryKind::Spherical => kappa > 0.0,
            GeometryKind::Hyperbolic => kappa < 0.0,
        }
    }

    pub fn check_curvature(self, kappa: f64) -> Result<()> {
        if self.curvature_sign_ok(kappa) {
            Ok(())
        } else {
            Err(Error::CurvatureSign {
                kind: self.to_string(),
                kappa,
            })
        }
    }
}

impl fmt::Display for GeometryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GeometryKind::Euclidean => "euclidean",
            GeometryKind::Spherical => "spherical",
            GeometryKind::Hyperbolic => "hyperbolic",
        })
    }
}

impl std::str::FromStr for GeometryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "e" | "euclidean" => Ok(GeometryKind::Euclidean),
            "s" | "spherical" | "sphere" => Ok(GeometryKind::Spherical),
            "h" | "hyperbolic" => Ok(GeometryKind::Hyperbolic),
            other => Err(Error::invalid(format!("unknown geometry '{other}'"))),
        }
    }
}

/// A constant-curvature manifold `M^p(kappa)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSpec {
    pub kind: GeometryKind,
    pub dim: usize,
    pub curvature: f64,
}

impl ManifoldSpec {
    pub fn new(kind: GeometryKind, dim: usize, curvature: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("manifold dimension must be at least 1"));
        }
        kind.check_curvature(curvature)?;
        Ok(ManifoldSpec { kind, dim, curvature })
    }

    pub fn euclidean(dim: usize) -> Self {
        ManifoldSpec {
            kind: GeometryKind::Euclidean,
            dim,
            curvature: 0.0,
        }
    }

    /// Length of ambient coordinate vectors: `p` for Euclidean, `p + 1` otherwise.
    pub fn ambient_len(&self) -> usize {
        match self.kind {
            GeometryKind::Euclidean => self.dim,
            _ => self.dim + 1,
        }
    }

    /// Checks that `x` lies on the manifold.
    pub fn check_point(&self, x: &AmbientPoint) -> Result<()> {
        if x.0.len() != self.ambient_len() {
            return Err(Error::OffManifold(format!(
                "expected {} coordinates, got {}",
                self.ambient_len(),
                x.0.len()
            )));
        }
        if x.0.iter().any(|c| !c.is_finite()) {
            return Err(Error::OffManifold("non-finite coordinate".into()));
        }
        let k = self.curvature;
        match self.kind {
            GeometryKind::Euclidean => Ok(()),
            GeometryKind::Spherical => {
                let q = euclidean_form(&x.0, &x.0);
                if (k * q - 1.0).abs() > LOCUS_TOL {
                    return Err(Error::OffManifold(format!("Q(x,x) = {q}, expected {}", 1.0 / k)));
                }
                Ok(())
            }
            GeometryKind::Hyperbolic => {
                let q = minkowski_form(&x.0, &x.0);
                if (k * q - 1.0).abs() > LOCUS_TOL || x.0[0] <= 0.0 {
                    return Err(Error::OffManifold(format!(
                        "Q_M(x,x) = {q} with x0 = {}, expected {} and x0 > 0",
                        x.0[0],
                        1.0 / k
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Coordinates of a point in the ambient space of a model manifold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbientPoint(pub Vec<f64>);

impl AmbientPoint {
    pub fn coords(&self) -> &[f64] {
        &self.0
    }
}

pub fn euclidean_form(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Minkowski form with the time-like coordinate first.
pub fn minkowski_form(x: &[f64], y: &[f64]) -> f64 {
    -x[0] * y[0] + x[1..].iter().zip(&y[1..]).map(|(a, b)| a * b).sum::<f64>()
}

/// Geodesic distance without locus validation.
pub(crate) fn distance_unchecked(m: &ManifoldSpec, x: &[f64], y: &[f64]) -> f64 {
    let k = m.curvature;
    match m.kind {
        GeometryKind::Euclidean => x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
        GeometryKind::Spherical => (k * euclidean_form(x, y)).clamp(-1.0, 1.0).acos() / k.sqrt(),
        GeometryKind::Hyperbolic => (k * minkowski_form(x, y)).max(1.0).acosh() / (-k).sqrt(),
    }
}

pub fn geodesic_distance(m: &ManifoldSpec, x: &AmbientPoint, y: &AmbientPoint) -> Result<f64> {
    m.check_point(x)?;
    m.check_point(y)?;
    Ok(distance_unchecked(m, &x.0, &y.0))
}

/// Pairwise geodesic distance matrix.
pub fn distance_matrix(m: &ManifoldSpec, points: &[AmbientPoint]) -> Result<SymMatrix> {
    for p in points {
        m.check_point(p)?;
    }
    Ok(SymMatrix::from_fn(points.len(), |i, j| {
        if i == j {
            0.0
        } else {
            distance_unchecked(m, &points[i].0, &points[j].0)
        }
    }))
}

/// `J A J` with `J = I - 11ᵀ/K`.
pub fn double_center(a: &SymMatrix) -> SymMatrix {
    let k = a.order();
    if k == 0 {
        return a.clone();
    }
    let kf = k as f64;
    let row_mean: Vec<f64> = (0..k).map(|i| (0..k).map(|j| a.get(i, j)).sum::<f64>() / kf).collect();
    let grand = row_mean.iter().sum::<f64>() / kf;
    SymMatrix::from_fn(k, |i, j| a.get(i, j) - row_mean[i] - row_mean[j] + grand)
}

/// `W_kappa(D)`.
pub fn build_w(d: &SymMatrix, kappa: f64) -> SymMatrix {
    if kappa > 0.0 {
        let r = kappa.sqrt();
        d.map(|x| (r * x).cos() / kappa)
    } else if kappa < 0.0 {
        let r = (-kappa).sqrt();
        d.map(|x| (r * x).cosh() / kappa)
    } else {
        double_center(&d.map(|x| -0.5 * x * x))
    }
}

/// `kappa * W_kappa(D)`, i.e. `cos(sqrt(kappa) D)` or `cosh(sqrt(-kappa) D)`.
///
/// This is the curvature-free Gram form: it has a unit diagonal and, for a
/// hyperbolic configuration in `H^p`, signature `(1, K-p-1, p)`. The
/// curvature objective and the hyperbolic test work on this matrix. At
/// `kappa == 0` it returns `W_0`.
pub fn scaled_w(d: &SymMatrix, kappa: f64) -> SymMatrix {
    if kappa > 0.0 {
        let r = kappa.sqrt();
        d.map(|x| (r * x).cos())
    } else if kappa < 0.0 {
        let r = (-kappa).sqrt();
        d.map(|x| (r * x).cosh())
    } else {
        build_w(d, 0.0)
    }
}

/// Outcome of an isometric-embedding check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub feasible: bool,
    pub minimal_dim: usize,
    pub signature: Signature,
}

/// Whether the points behind `d` embed isometrically in the given geometry
/// at curvature `kappa`, and the smallest dimension that admits it.
///
/// * Euclidean: `W_0` positive semi-definite, dimension `rank(W_0)`.
/// * Spherical: `cos(sqrt(kappa) D)` has no negative eigenvalue and no
///   distance exceeds `pi / sqrt(kappa)`; dimension `n_+ - 1`.
/// * Hyperbolic: `cosh(sqrt(-kappa) D)` has exactly one positive
///   eigenvalue; dimension `n_-`.
///
/// `zero_tol` defaults to `1e-8 * max |lambda|`.
pub fn embeddable(d: &SymMatrix, kind: GeometryKind, kappa: f64, zero_tol: Option<f64>) -> Result<Embedding> {
    kind.check_curvature(kappa)?;
    let m = scaled_w(d, kappa);
    let vals = eigenvalues_sym(&m)?;
    let tol = zero_tol.unwrap_or_else(|| default_zero_tol(&vals));
    let sig = Signature::from_eigenvalues(&vals, tol);
    let (feasible, minimal_dim) = match kind {
        GeometryKind::Euclidean => (vals.first().is_none_or(|&l| l >= -tol), sig.positive),
        GeometryKind::Spherical => {
            let diameter = d.off_diagonal().fold(0.0f64, f64::max);
            let within = diameter <= std::f64::consts::PI / kappa.sqrt() * (1.0 + 1e-12);
            (sig.negative == 0 && within, sig.positive.saturating_sub(1))
        }
        GeometryKind::Hyperbolic => (sig.positive == 1, sig.negative),
    };
    Ok(Embedding {
        feasible,
        minimal_dim,
        signature: sig,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn pt(v: &[f64]) -> AmbientPoint {
        AmbientPoint(v.to_vec())
    }

    #[test]
    fn distances_on_each_geometry() {
        let e2 = ManifoldSpec::euclidean(2);
        assert!((geodesic_distance(&e2, &pt(&[0.0, 0.0]), &pt(&[3.0, 4.0])).unwrap() - 5.0).abs() < 1e-15);

        let s2 = ManifoldSpec::new(GeometryKind::Spherical, 2, 1.0).unwrap();
        let d = geodesic_distance(&s2, &pt(&[1.0, 0.0, 0.0]), &pt(&[0.0, 1.0, 0.0])).unwrap();
        assert!((d - FRAC_PI_2).abs() < 1e-15);

        let h2 = ManifoldSpec::new(GeometryKind::Hyperbolic, 2, -1.0).unwrap();
        let y = pt(&[1f64.cosh(), 1f64.sinh(), 0.0]);
        let d = geodesic_distance(&h2, &pt(&[1.0, 0.0, 0.0]), &y).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn clamping_avoids_nan() {
        let s2 = ManifoldSpec::new(GeometryKind::Spherical, 2, 1.0).unwrap();
        let x = pt(&[1.0, 0.0, 0.0]);
        assert_eq!(geodesic_distance(&s2, &x, &x).unwrap(), 0.0);
        let anti = pt(&[-1.0, 0.0, 0.0]);
        assert!((geodesic_distance(&s2, &x, &anti).unwrap() - PI).abs() < 1e-12);
        let h2 = ManifoldSpec::new(GeometryKind::Hyperbolic, 2, -1.0).unwrap();
        let o = pt(&[1.0, 0.0, 0.0]);
        assert_eq!(geodesic_distance(&h2, &o, &o).unwrap(), 0.0);
    }

    #[test]
    fn off_locus_points_rejected() {
        let s2 = ManifoldSpec::new(GeometryKind::Spherical, 2, 1.0).unwrap();
        assert!(geodesic_distance(&s2, &pt(&[2.0, 0.0, 0.0]), &pt(&[1.0, 0.0, 0.0])).is_err());
        let h2 = ManifoldSpec::new(GeometryKind::Hyperbolic, 2, -1.0).unwrap();
        assert!(geodesic_distance(&h2, &pt(&[-1.0, 0.0, 0.0]), &pt(&[1.0, 0.0, 0.0])).is_err());
        assert!(geodesic_distance(&h2, &pt(&[1.0, 0.0]), &pt(&[1.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn manifold_spec_validation() {
        assert!(ManifoldSpec::new(GeometryKind::Spherical, 2, -1.0).is_err());
        assert!(ManifoldSpec::new(GeometryKind::Hyperbolic, 2, 0.0).is_err());
        assert!(ManifoldSpec::new(GeometryKind::Euclidean, 0, 0.0).is_err());
        assert!(ManifoldSpec::new(GeometryKind::Euclidean, 3, 0.1).is_err());
    }

    #[test]
    fn build_w_examples() {
        assert_eq!(build_w(&SymMatrix::zeros(3), 0.0), SymMatrix::zeros(3));

        let d = SymMatrix::from_fn(3, |i, j| if i == j { 0.0 } else { FRAC_PI_2 });
        let w = build_w(&d, 1.0);
        assert!(w.distance(&SymMatrix::identity(3)) < 1e-15);

        let d = SymMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let w = build_w(&d, 0.0);
        let want = SymMatrix::from_rows(&[vec![0.25, -0.25], vec![-0.25, 0.25]]).unwrap();
        assert!(w.distance(&want) < 1e-15);
    }

    #[test]
    fn orthogonal_sphere_points() {
        let d = SymMatrix::from_fn(3, |i, j| if i == j { 0.0 } else { FRAC_PI_2 });
        let sig = crate::linalg::signature_of(&build_w(&d, 1.0), None).unwrap();
        assert_eq!((sig.positive, sig.zero, sig.negative), (3, 0, 0));
        let e = embeddable(&d, GeometryKind::Spherical, 1.0, None).unwrap();
        assert!(e.feasible);
        assert_eq!(e.minimal_dim, 2);
    }

    #[test]
    fn planar_points_embed_in_two_dimensions() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.3, 2.0], [-1.5, 0.7]];
        let e2 = ManifoldSpec::euclidean(2);
        let pts: Vec<_> = pts.iter().map(|p| pt(p)).collect();
        let d = distance_matrix(&e2, &pts).unwrap();
        let e = embeddable(&d, GeometryKind::Euclidean, 0.0, None).unwrap();
        assert!(e.feasible);
        assert_eq!(e.minimal_dim, 2);
    }

    #[test]
    fn wrapped_distance_is_not_spherical() {
        let d = SymMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let kappa = (2.0 * PI).powi(2);
        let e = embeddable(&d, GeometryKind::Spherical, kappa, None).unwrap();
        assert!(!e.feasible);
    }

    #[test]
    fn sign_mismatch_is_an_error() {
        let d = SymMatrix::zeros(3);
        assert!(matches!(
            embeddable(&d, GeometryKind::Spherical, -1.0, None),
            Err(Error::CurvatureSign { .. })
        ));
        assert!(embeddable(&d, GeometryKind::Euclidean, 1.0, None).is_err());
    }

    #[test]
    fn w_is_lipschitz_in_kappa() {
        let d = SymMatrix::from_fn(5, |i, j| if i == j { 0.0 } else { 0.2 + 0.13 * ((i * 7 + j * 3) % 5) as f64 });
        for &k in &[-1.3, -0.4, 0.5, 1.0, 2.0] {
            let w = build_w(&d, k);
            for &h in &[1e-3, 1e-4, 1e-5] {
                let diff = build_w(&d, k + h).distance(&w);
                assert!(diff <= 50.0 * h, "kappa={k} h={h} diff={diff}");
            }
        }
    }

    #[test]
    fn small_curvature_matches_double_centering() {
        let pts: Vec<_> = [[0.0, 0.0], [0.4, 0.1], [0.2, 0.5], [-0.3, 0.2], [0.1, -0.4]]
            .iter()
            .map(|p| pt(p))
            .collect();
        let d = distance_matrix(&ManifoldSpec::euclidean(2), &pts).unwrap();
        let w0 = build_w(&d, 0.0);
        let mut prev = f64::INFINITY;
        for &k in &[1e-3, 1e-4] {
            let err = double_center(&build_w(&d, k)).distance(&w0);
            assert!(err <= 10.0 * k, "kappa={k} err={err}");
            assert!(err < prev);
            prev = err;
        }
    }
}
