use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix2, Vector2, Vector3};

use crate::error::{Error, Result};

/// Planar cubic `y = c0 + c1 x + c2 x^2 + c3 x^3` in the obstacle-local
/// frame (x along the velocity, y to the left), traversed for `arc_length`
/// meters from `x = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathTemplate {
    pub coeffs: [f64; 4],
    pub arc_length: f64,
}

impl PathTemplate {
    pub fn y(&self, x: f64) -> f64 {
        let [c0, c1, c2, c3] = self.coeffs;
        c0 + x * (c1 + x * (c2 + x * c3))
    }

    pub fn slope(&self, x: f64) -> f64 {
        let [_, c1, c2, c3] = self.coeffs;
        c1 + x * (2.0 * c2 + x * 3.0 * c3)
    }

    /// Mirror image about the local x axis.
    pub fn mirrored(&self) -> Self {
        Self { coeffs: self.coeffs.map(|c| -c), arc_length: self.arc_length }
    }

    /// Points every `step` meters of arc length, plus the end point.
    pub fn sample(&self, step: f64) -> Vec<Vector2<f64>> {
        // trapezoid integration of the arc length on a fine x grid
        let dx = step / 64.0;
        let mut pts = vec![Vector2::new(0.0, self.y(0.0))];
        let (mut x, mut s) = (0.0f64, 0.0f64);
        let mut next = step;
        let mut speed = (1.0 + self.slope(0.0).powi(2)).sqrt();
        while s < self.arc_length {
            let x1 = x + dx;
            let speed1 = (1.0 + self.slope(x1).powi(2)).sqrt();
            let ds = 0.5 * (speed + speed1) * dx;
            let s1 = s + ds;
            while next <= s1.min(self.arc_length) && next < self.arc_length {
                let xt = x + dx * (next - s) / ds;
                pts.push(Vector2::new(xt, self.y(xt)));
                next += step;
            }
            if s1 >= self.arc_length {
                let xt = x + dx * (self.arc_length - s) / ds;
                pts.push(Vector2::new(xt, self.y(xt)));
                break;
            }
            (x, s, speed) = (x1, s1, speed1);
        }
        pts
    }
}

/// Candidate paths ordered from sharpest left turn through straight to
/// sharpest right turn, pre-sampled as local-frame polylines.
#[derive(Debug, Clone, PartialEq)]
pub struct PathLibrary {
    templates: Vec<PathTemplate>,
    polylines: Vec<Vec<Vector2<f64>>>,
    horizon: f64,
    sample_step: f64,
}

/// Least-squares fit of `y = c2 x^2 + c3 x^3` to a constant-curvature arc.
fn fit_arc(kappa: f64, length: f64) -> PathTemplate {
    let n = 200;
    let mut ata = Matrix2::zeros();
    let mut aty = Vector2::zeros();
    for i in 1..=n {
        let s = length * i as f64 / n as f64;
        let (x, y) = ((kappa * s).sin() / kappa, (1.0 - (kappa * s).cos()) / kappa);
        let row = Vector2::new(x * x, x * x * x);
        ata += row * row.transpose();
        aty += row * y;
    }
    let c = ata.lu().solve(&aty).expect("arc fit normal equations are regular");
    PathTemplate { coeffs: [0.0, 0.0, c[0], c[1]], arc_length: length }
}

impl PathLibrary {
    /// `l` arcs with curvature `kappa_max (1 - 2i/(l-1))`, each fit by a
    /// cubic, `length` meters long. Right turns are exact mirrors of the
    /// left turns and the center path is exactly straight.
    pub fn generate(l: usize, kappa_max: f64, length: f64, horizon: f64, sample_step: f64) -> Result<Self> {
        if l < 3 || l % 2 == 0 {
            return Err(Error::config("path count must be odd and >= 3"));
        }
        if !(kappa_max > 0.0) {
            return Err(Error::config("kappa_max must be > 0"));
        }
        let mid = (l - 1) / 2;
        let left: Vec<PathTemplate> = (0..mid)
            .map(|i| fit_arc(kappa_max * (1.0 - 2.0 * i as f64 / (l - 1) as f64), length))
            .collect();
        let mut templates = left.clone();
        templates.push(PathTemplate { coeffs: [0.0; 4], arc_length: length });
        templates.extend(left.iter().rev().map(PathTemplate::mirrored));
        Self::from_templates(templates, horizon, sample_step)
    }

    pub fn from_templates(templates: Vec<PathTemplate>, horizon: f64, sample_step: f64) -> Result<Self> {
        let l = templates.len();
        if l < 3 || l % 2 == 0 {
            return Err(Error::config("path count must be odd and >= 3"));
        }
        if !(horizon > 0.0 && sample_step > 0.0) {
            return Err(Error::config("horizon and sample_step must be > 0"));
        }
        for (i, t) in templates.iter().enumerate() {
            if t.coeffs[0] != 0.0 || t.coeffs[1] != 0.0 {
                return Err(Error::config(format!("path {i} must start at the origin heading along +x")));
            }
            if !(t.arc_length > 0.0) || t.coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::config(format!("path {i} has a bad arc length or coefficient")));
            }
            let m = &templates[l - 1 - i];
            let mirrored = (0..4).all(|k| (t.coeffs[k] + m.coeffs[k]).abs() <= 1e-9) && (t.arc_length - m.arc_length).abs() <= 1e-9;
            if !mirrored {
                return Err(Error::config(format!("path {i} is not mirrored by path {}", l - 1 - i)));
            }
        }
        let polylines = templates.iter().map(|t| t.sample(sample_step)).collect();
        Ok(Self { templates, polylines, horizon, sample_step })
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn center(&self) -> usize {
        self.templates.len() / 2
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn templates(&self) -> &[PathTemplate] {
        &self.templates
    }

    pub fn local_polyline(&self, i: usize) -> &[Vector2<f64>] {
        &self.polylines[i]
    }

    /// Path `i` in the map frame for an obstacle at `position` moving with
    /// planar `velocity`, scaled so that it is covered at the current speed
    /// over the horizon, at height `z`.
    pub fn map_polyline(&self, i: usize, position: Vector2<f64>, velocity: Vector2<f64>, z: f64) -> Vec<Vector3<f64>> {
        let speed = velocity.norm();
        let (c, s) = if speed > 0.0 { (velocity.x / speed, velocity.y / speed) } else { (1.0, 0.0) };
        let scale = speed * self.horizon / self.templates[i].arc_length;
        self.polylines[i]
            .iter()
            .map(|p| {
                let (x, y) = (p.x * scale, p.y * scale);
                Vector3::new(position.x + (c * x - s * y), position.y + (s * x + c * y), z)
            })
            .collect()
    }

    /// One template per line: `c0 c1 c2 c3 arc_length`, left to right.
    /// Blank lines and `#` comments are skipped.
    pub fn parse(text: &str, horizon: f64, sample_step: f64) -> Result<Self> {
        let mut templates = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::format("path library", format!("line {}: bad number", n + 1)))?;
            let [c0, c1, c2, c3, len] = vals[..] else {
                return Err(Error::format("path library", format!("line {}: expected 5 values", n + 1)));
            };
            templates.push(PathTemplate { coeffs: [c0, c1, c2, c3], arc_length: len });
        }
        Self::from_templates(templates, horizon, sample_step)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# c0 c1 c2 c3 arc_length\n");
        for t in &self.templates {
            let [c0, c1, c2, c3] = t.coeffs;
            writeln!(out, "{c0:e} {c1:e} {c2:e} {c3:e} {:e}", t.arc_length).expect("writing to a string");
        }
        out
    }

    pub fn load(path: &Path, horizon: f64, sample_step: f64) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, horizon, sample_step)
    }
}
