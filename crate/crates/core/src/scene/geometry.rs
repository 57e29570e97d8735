use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn distance(a: Vec3, b: Vec3) -> f64 {
    norm(sub(a, b))
}

/// Microphone positions in meters relative to the array center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    #[serde(default)]
    pub name: String,
    pub positions: Vec<Vec3>,
}

/// Slim phone-like layout: two microphones at each end.
pub const IRREGULAR_POSITIONS: [Vec3; 4] = [
    [0.08, 0.0, 0.03],
    [0.08, 0.0, -0.03],
    [-0.08, 0.005, 0.005],
    [-0.08, -0.005, -0.005],
];

impl ArrayGeometry {
    pub fn new(name: impl Into<String>, positions: Vec<Vec3>) -> Result<Self> {
        let g = ArrayGeometry {
            name: name.into(),
            positions,
        };
        g.validate()?;
        Ok(g)
    }

    /// Regular tetrahedron with vertices on a sphere of `radius` meters.
    /// Canonical orientation: vertices along (1,1,1), (1,−1,−1), (−1,1,−1),
    /// (−1,−1,1).
    pub fn tetrahedron(radius: f64) -> Self {
        let s = radius / 3f64.sqrt();
        ArrayGeometry {
            name: "tetra".into(),
            positions: vec![[s, s, s], [s, -s, -s], [-s, s, -s], [-s, -s, s]],
        }
    }

    /// The 9 cm tetrahedral array.
    pub fn tetra() -> Self {
        Self::tetrahedron(0.09)
    }

    pub fn irregular() -> Self {
        ArrayGeometry {
            name: "irregular".into(),
            positions: IRREGULAR_POSITIONS.to_vec(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut g: ArrayGeometry = serde_json::from_str(text)?;
        if g.name.is_empty() {
            g.name = "custom".into();
        }
        g.validate()?;
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn centroid(&self) -> Vec3 {
        let q = self.positions.len().max(1) as f64;
        let mut c = [0.0; 3];
        for p in &self.positions {
            for i in 0..3 {
                c[i] += p[i] / q;
            }
        }
        c
    }

    /// Largest microphone distance from the centroid.
    pub fn max_radius(&self) -> f64 {
        let c = self.centroid();
        self.positions
            .iter()
            .map(|p| distance(*p, c))
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        if self.positions.is_empty() {
            return Err(Error::InvalidGeometry("array needs at least one microphone".into()));
        }
        if self.positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGeometry("non-finite microphone position".into()));
        }
        let c = self.centroid();
        if norm(c) > 1e-6 {
            return Err(Error::InvalidGeometry(format!(
                "centroid {c:?} is not at the array center"
            )));
        }
        for (i, a) in self.positions.iter().enumerate() {
            for b in &self.positions[i + 1..] {
                if distance(*a, *b) <= 0.0 {
                    return Err(Error::InvalidGeometry(format!(
                        "microphones {i} share position {a:?}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn presets_are_valid() {
        for g in [ArrayGeometry::tetra(), ArrayGeometry::irregular()] {
            g.validate().unwrap();
            assert_eq!(g.len(), 4);
        }
    }

    #[test]
    fn tetra_is_regular() {
        let g = ArrayGeometry::tetra();
        for p in &g.positions {
            assert_abs_diff_eq!(norm(*p), 0.09, epsilon = 1e-15);
        }
        let edge = distance(g.positions[0], g.positions[1]);
        for i in 0..4 {
            for j in i + 1..4 {
                assert_abs_diff_eq!(distance(g.positions[i], g.positions[j]), edge, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn rejects_off_center_and_duplicates() {
        assert!(ArrayGeometry::new("x", vec![[0.1, 0.0, 0.0]]).is_err());
        assert!(ArrayGeometry::new("x", vec![]).is_err());
        assert!(ArrayGeometry::new("x", vec![[0.0; 3], [0.0; 3]]).is_err());
        assert!(ArrayGeometry::new("x", vec![[0.0; 3]]).is_ok());
    }

    #[test]
    fn parses_custom_json() {
        let g = ArrayGeometry::from_json(r#"{"positions": [[0.01,0,0],[-0.01,0,0]]}"#).unwrap();
        assert_eq!(g.name, "custom");
        assert_eq!(g.len(), 2);
    }
}
