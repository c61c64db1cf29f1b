use rand::Rng;
use rand_distr::StandardNormal;

use super::{MotionProgram, PhantomConfig};
use crate::error::Result;
use crate::events::{EventAnnotation, FrameStack, Phase, Recording, View};
use crate::rng;

const TISSUE: f64 = 0.35;
const WALL: f64 = 0.7;
const BLOOD: f64 = 0.06;
const LEAFLET: f64 = 0.95;

/// Physical state shown in one frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameState {
    pub phase: Phase,
    /// Ventricular volume relative to the end-diastolic volume.
    pub volume: f64,
    pub mitral_deg: f64,
    pub aortic_deg: f64,
}

/// State of the phantom at program time `t_ms`.
pub fn render_frame_state(program: &MotionProgram, t_ms: f64, cfg: &PhantomConfig) -> FrameState {
    let (phase, p) = program.state_at(t_ms);
    let v_es = cfg.ventricle.systolic_fraction;
    let v_fill = v_es + cfg.ventricle.early_fill_fraction * (1.0 - v_es);
    let v_ed = if program.atrial_systole { 1.0 } else { v_fill };
    let lf = &cfg.leaflets;
    let (volume, mitral_deg) = match phase {
        Phase::Ivc => (v_ed, 0.0),
        Phase::Ejection => (v_ed - (v_ed - v_es) * p, 0.0),
        Phase::Ivr => (v_es, 0.0),
        Phase::EarlyFilling => (
            v_es + (v_fill - v_es) * p,
            lf.mitral_open_deg - (lf.mitral_open_deg - lf.mitral_diastasis_deg) * p,
        ),
        Phase::Diastasis => (v_fill, lf.mitral_diastasis_deg),
        Phase::AtrialSystole => (
            v_fill + (1.0 - v_fill) * p,
            lf.mitral_diastasis_deg + (lf.mitral_atrial_deg - lf.mitral_diastasis_deg) * p,
        ),
    };
    let aortic_deg = if phase == Phase::Ejection { lf.aortic_open_deg } else { 0.0 };
    FrameState {
        phase,
        volume,
        mitral_deg,
        aortic_deg,
    }
}

struct Anatomy {
    cx: f64,
    cy: f64,
    scale: f64,
    tilt: f64,
    width: f64,
    gain: f64,
}

impl Anatomy {
    fn sample(program: &MotionProgram, view: View, cfg: &PhantomConfig) -> Self {
        // Shared by all views of a patient.
        let mut rng = rng::stream(program.seed, "anatomy", "");
        let j = cfg.ventricle.jitter;
        let dx = rng.gen_range(-j..=j);
        let dy = rng.gen_range(-j..=j);
        let scale = rng.gen_range(0.9..=1.1);
        let gain = rng.gen_range(0.85..=1.15);
        let tilt_jitter = rng.gen_range(-0.05..=0.05);
        let (tilt, width) = match view {
            View::A4ch => (0.0, 1.0),
            View::A2ch => (-0.08, 0.92),
            View::Aplax => (0.10, 0.85),
        };
        Anatomy {
            cx: cfg.ventricle.center[0] + dx,
            cy: cfg.ventricle.center[1] + dy,
            scale,
            tilt: tilt + tilt_jitter,
            width,
            gain,
        }
    }

    /// Rotates a vector from the ventricle frame into image coordinates.
    fn rot(&self, v: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.tilt.sin_cos();
        [c * v[0] - s * v[1], s * v[0] + c * v[1]]
    }
}

struct Segment {
    a: [f64; 2],
    b: [f64; 2],
}

impl Segment {
    fn from_dir(a: [f64; 2], dir: [f64; 2], len: f64) -> Self {
        Segment {
            a,
            b: [a[0] + dir[0] * len, a[1] + dir[1] * len],
        }
    }

    fn distance(&self, p: [f64; 2]) -> f64 {
        let d = [self.b[0] - self.a[0], self.b[1] - self.a[1]];
        let w = [p[0] - self.a[0], p[1] - self.a[1]];
        let len2 = d[0] * d[0] + d[1] * d[1];
        let t = if len2 > 0.0 {
            ((w[0] * d[0] + w[1] * d[1]) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let q = [self.a[0] + t * d[0] - p[0], self.a[1] + t * d[1] - p[1]];
        (q[0] * q[0] + q[1] * q[1]).sqrt()
    }
}

/// Signed distance (pixels, approximate) from `p` to a rotated ellipse edge.
fn ellipse_distance(p: [f64; 2], c: [f64; 2], axes: [f64; 2], tilt: f64, px: f64) -> f64 {
    let (s, co) = tilt.sin_cos();
    let d = [p[0] - c[0], p[1] - c[1]];
    let u = (co * d[0] + s * d[1]) / axes[0];
    let v = (-s * d[0] + co * d[1]) / axes[1];
    let rho = (u * u + v * v).sqrt();
    let r = (d[0] * d[0] + d[1] * d[1]).sqrt() * px;
    if rho < 1e-12 {
        return -axes[0].min(axes[1]) * px;
    }
    r * (rho - 1.0) / rho
}

fn coverage(signed_px: f64) -> f64 {
    (0.5 - signed_px).clamp(0.0, 1.0)
}

struct Geometry {
    center: [f64; 2],
    axes: [f64; 2],
    wall_axes: [f64; 2],
    la_center: [f64; 2],
    la_radius: f64,
    mitral: Vec<Segment>,
    aortic: Vec<Segment>,
}

fn geometry(state: &FrameState, anat: &Anatomy, view: View, cfg: &PhantomConfig) -> Geometry {
    let s = state.volume.sqrt() * anat.scale;
    let axes = [
        cfg.ventricle.semi_axes[0] * anat.width * s,
        cfg.ventricle.semi_axes[1] * s,
    ];
    let c = [anat.cx, anat.cy];
    let wall_axes = [axes[0] + 0.035 * anat.scale, axes[1] + 0.035 * anat.scale];
    let down = anat.rot([0.0, 1.0]);
    let base = [c[0] + down[0] * axes[1], c[1] + down[1] * axes[1]];
    let la_center = [base[0] + down[0] * 0.13 * anat.scale, base[1] + down[1] * 0.13 * anat.scale];

    let lf = &cfg.leaflets;
    let hw = lf.annulus_half_width * anat.scale * anat.width;
    let right = anat.rot([hw, 0.0]);
    let hinge_r = [base[0] + right[0], base[1] + right[1]];
    let hinge_l = [base[0] - right[0], base[1] - right[1]];
    let th = state.mitral_deg.to_radians();
    let mitral = vec![
        Segment::from_dir(hinge_r, anat.rot([-th.cos(), -th.sin()]), lf.mitral_length * anat.scale),
        Segment::from_dir(hinge_l, anat.rot([th.cos(), -th.sin()]), lf.mitral_length * 0.7 * anat.scale),
    ];
    let mut aortic = Vec::new();
    if view.aortic_valve_visible() {
        let al = state.aortic_deg.to_radians();
        let root = anat.rot([hw + 0.06 * anat.scale, -0.04 * anat.scale]);
        let h1 = [base[0] + root[0], base[1] + root[1]];
        let across = anat.rot([0.07 * anat.scale, 0.0]);
        let h2 = [h1[0] + across[0], h1[1] + across[1]];
        let len = lf.aortic_length * anat.scale;
        aortic.push(Segment::from_dir(h1, anat.rot([al.cos(), -al.sin()]), len));
        aortic.push(Segment::from_dir(h2, anat.rot([-al.cos(), -al.sin()]), len));
    }
    Geometry {
        center: c,
        axes,
        wall_axes,
        la_center,
        la_radius: 0.09 * anat.scale,
        mitral,
        aortic,
    }
}

fn render_image(state: &FrameState, anat: &Anatomy, view: View, cfg: &PhantomConfig, out: &mut [f64]) {
    let n = cfg.size;
    let px = n as f64;
    let g = geometry(state, anat, view, cfg);
    let (c, axes, wall_axes, la_c, la_r) = (g.center, g.axes, g.wall_axes, g.la_center, g.la_radius);
    let lf = &cfg.leaflets;
    let leaflets: Vec<&Segment> = g.mitral.iter().chain(&g.aortic).collect();
    let half_thick = lf.thickness * 0.5 * px;
    let sector = cfg.sector_half_angle_deg.to_radians();

    for y in 0..n {
        for x in 0..n {
            let p = [(x as f64 + 0.5) / px, (y as f64 + 0.5) / px];
            let dx = p[0] - 0.5;
            let r = (dx * dx + p[1] * p[1]).sqrt();
            if r > 0.98 || dx.atan2(p[1]).abs() > sector {
                out[y * n + x] = 0.0;
                continue;
            }
            let mut v = TISSUE;
            let la = (((p[0] - la_c[0]).powi(2) + (p[1] - la_c[1]).powi(2)).sqrt() - la_r) * px;
            v += (BLOOD - v) * coverage(la);
            v += (WALL - v) * coverage(ellipse_distance(p, c, wall_axes, anat.tilt, px));
            v += (BLOOD - v) * coverage(ellipse_distance(p, c, axes, anat.tilt, px));
            for seg in &leaflets {
                let cov = coverage(seg.distance(p) * px - half_thick);
                v = v.max(LEAFLET * cov);
            }
            out[y * n + x] = v;
        }
    }
}

/// Pixels covered by the aortic leaflets in `view` at program time `t_ms`.
/// Always empty for views without a visible aortic valve.
#[cfg(test)]
pub(crate) fn aortic_mask(program: &MotionProgram, view: View, cfg: &PhantomConfig, t_ms: f64) -> Vec<bool> {
    let n = cfg.size;
    let px = n as f64;
    let anat = Anatomy::sample(program, view, cfg);
    let state = render_frame_state(program, t_ms, cfg);
    let g = geometry(&state, &anat, view, cfg);
    let half_thick = cfg.leaflets.thickness * 0.5 * px;
    (0..n * n)
        .map(|i| {
            let p = [((i % n) as f64 + 0.5) / px, ((i / n) as f64 + 0.5) / px];
            g.aortic.iter().any(|s| coverage(s.distance(p) * px - half_thick) >= 1.0)
        })
        .collect()
}

/// Renders every frame of `program` in `view` and returns the exact annotation.
pub fn render_recording(
    program: &MotionProgram,
    view: View,
    cfg: &PhantomConfig,
    id: &str,
) -> Result<(Recording, EventAnnotation)> {
    cfg.validate()?;
    program.validate()?;
    let n = cfg.size;
    let n_frames = program.n_frames();
    let anat = Anatomy::sample(program, view, cfg);
    let mut noise = rng::stream(program.seed, "speckle", view.name());
    let mut img = vec![0.0; n * n];
    let mut data = Vec::with_capacity(n_frames * n * n);
    let dt = program.frame_ms();
    for f in 0..n_frames {
        // Sampling at the end of the frame interval keeps the rendered state in
        // step with the floor-based event frames.
        let t = program.start_offset_ms + (f + 1) as f64 * dt;
        let state = render_frame_state(program, t, cfg);
        render_image(&state, &anat, view, cfg, &mut img);
        for &v in &img {
            let mut v = v * anat.gain;
            if cfg.noise > 0.0 && v > 0.0 {
                let z: f64 = noise.sample(StandardNormal);
                v *= 1.0 + cfg.noise * z;
            }
            let q = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
            data.push(f32::from(q) / 255.0);
        }
    }
    let frames = FrameStack::new(n_frames, n, n, data)?;
    let rec = Recording::new(id, program.fps, view, frames)?;
    Ok((rec, program.annotation()))
}
