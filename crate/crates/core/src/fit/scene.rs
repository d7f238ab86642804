use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{compute_frames, TriMesh};
use crate::splat::{
    local_backward, quat, sigmoid, to_global_all, BindingConfig, BindingMode, FreeGaussian, GlobalGaussian, GlobalGrad,
    LocalGaussian,
};
use crate::Vec3;

/// Flat parameters per bound Gaussian: mean 3, rotation 4, log-scale 3, opacity 1, SH 48.
pub const BOUND_STRIDE: usize = 59;
/// Bound layout plus a 3-component normal.
pub const FREE_STRIDE: usize = 62;

/// Learning-rate group of one flat parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamGroup {
    Mean,
    Rotation,
    LogScale,
    Opacity,
    ShDc,
    ShRest,
    Normal,
}

fn group_of(offset: usize) -> ParamGroup {
    match offset {
        0..=2 => ParamGroup::Mean,
        3..=6 => ParamGroup::Rotation,
        7..=9 => ParamGroup::LogScale,
        10 => ParamGroup::Opacity,
        11..=13 => ParamGroup::ShDc,
        14..=58 => ParamGroup::ShRest,
        _ => ParamGroup::Normal,
    }
}

/// The set of Gaussians being optimised.
#[derive(Clone, Debug, PartialEq)]
pub enum Scene {
    /// Unbound Gaussians, optimised in the first stage.
    Free { gaussians: Vec<FreeGaussian>, sh_degree: u8 },
    /// Gaussians bound to a fixed mesh, optimised in the second stage.
    Bound {
        gaussians: Vec<LocalGaussian>,
        mesh: TriMesh,
        config: BindingConfig,
    },
}

fn write_common(out: &mut [f64], mean: &Vec3, q: &[f64; 4], ls: &Vec3, op: f64, sh: &crate::splat::ShCoeffs) {
    out[0..3].copy_from_slice(mean.as_slice());
    out[3..7].copy_from_slice(q);
    out[7..10].copy_from_slice(ls.as_slice());
    out[10] = op;
    for (k, c) in sh.iter().enumerate() {
        out[11 + 3 * k..14 + 3 * k].copy_from_slice(c);
    }
}

fn read_common(p: &[f64]) -> (Vec3, [f64; 4], Vec3, f64, crate::splat::ShCoeffs) {
    let mut sh = [[0.0; 3]; 16];
    for (k, c) in sh.iter_mut().enumerate() {
        c.copy_from_slice(&p[11 + 3 * k..14 + 3 * k]);
    }
    (
        Vec3::new(p[0], p[1], p[2]),
        [p[3], p[4], p[5], p[6]],
        Vec3::new(p[7], p[8], p[9]),
        p[10],
        sh,
    )
}

impl Scene {
    pub fn len(&self) -> usize {
        match self {
            Scene::Free { gaussians, .. } => gaussians.len(),
            Scene::Bound { gaussians, .. } => gaussians.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn stride(&self) -> usize {
        match self {
            Scene::Free { .. } => FREE_STRIDE,
            Scene::Bound { .. } => BOUND_STRIDE,
        }
    }

    pub fn sh_degree(&self) -> u8 {
        match self {
            Scene::Free { sh_degree, .. } => *sh_degree,
            Scene::Bound { config, .. } => config.sh_degree,
        }
    }

    /// World-space Gaussians for rendering.
    pub fn globals(&self) -> Result<Vec<GlobalGaussian>> {
        match self {
            Scene::Free { gaussians, sh_degree } => Ok(gaussians.iter().map(|g| g.to_global(*sh_degree)).collect()),
            Scene::Bound { gaussians, mesh, config } => to_global_all(gaussians, mesh, config),
        }
    }

    /// Flattened learnable parameters.
    pub fn params(&self) -> Vec<f64> {
        let stride = self.stride();
        let mut out = vec![0.0; self.len() * stride];
        match self {
            Scene::Free { gaussians, .. } => {
                for (g, p) in gaussians.iter().zip(out.chunks_mut(stride)) {
                    write_common(p, &g.mean, &g.rotation, &g.log_scale, g.opacity_logit, &g.sh);
                    if let Some(n) = g.normal {
                        p[59..62].copy_from_slice(n.as_slice());
                    }
                }
            }
            Scene::Bound { gaussians, .. } => {
                for (g, p) in gaussians.iter().zip(out.chunks_mut(stride)) {
                    write_common(p, &g.local_mean, &g.local_rotation, &g.local_log_scale, g.opacity_logit, &g.sh);
                }
            }
        }
        out
    }

    /// Inverse of [`Scene::params`]. Bindings, the mesh and absent normals are untouched.
    pub fn set_params(&mut self, params: &[f64]) {
        let stride = self.stride();
        assert_eq!(params.len(), self.len() * stride);
        match self {
            Scene::Free { gaussians, .. } => {
                for (g, p) in gaussians.iter_mut().zip(params.chunks(stride)) {
                    (g.mean, g.rotation, g.log_scale, g.opacity_logit, g.sh) = read_common(p);
                    if g.normal.is_some() {
                        g.normal = Some(Vec3::new(p[59], p[60], p[61]));
                    }
                }
            }
            Scene::Bound { gaussians, .. } => {
                for (g, p) in gaussians.iter_mut().zip(params.chunks(stride)) {
                    (g.local_mean, g.local_rotation, g.local_log_scale, g.opacity_logit, g.sh) = read_common(p);
                }
            }
        }
    }

    /// Learning-rate group of every flat parameter.
    pub fn param_groups(&self) -> Vec<ParamGroup> {
        let stride = self.stride();
        (0..self.len() * stride).map(|i| group_of(i % stride)).collect()
    }

    /// Per-parameter factors on the mean learning rate, so a mean step moves a
    /// Gaussian by about the same world distance in every binding mode.
    ///
    /// Shape-aware local means are stretched by the triangle's adaption vector
    /// on the way to world space, so their rate is divided by it axis-wise.
    /// Every other entry is 1.
    pub fn mean_rate_factors(&self) -> Vec<f64> {
        let stride = self.stride();
        let mut out = vec![1.0; self.len() * stride];
        if let Scene::Bound { gaussians, mesh, config } = self {
            if config.mode == BindingMode::ShapeAware {
                let frames = compute_frames(mesh);
                for (g, p) in gaussians.iter().zip(out.chunks_mut(stride)) {
                    if let Some(f) = frames.get(g.tri_index as usize).copied().flatten() {
                        for k in 0..3 {
                            p[k] = 1.0 / f.adaption[k];
                        }
                    }
                }
            }
        }
        out
    }

    /// Chains world-space gradients to the flat parameter vector.
    pub fn chain_gradients(&self, grads: &[GlobalGrad]) -> Result<Vec<f64>> {
        if grads.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} gradients", self.len()),
                got: grads.len().to_string(),
            });
        }
        let stride = self.stride();
        let mut out = vec![0.0; self.len() * stride];
        match self {
            Scene::Free { gaussians, .. } => {
                out.par_chunks_mut(stride)
                    .zip(gaussians.par_iter().zip(grads))
                    .for_each(|(p, (g, d))| free_backward(g, d, p));
            }
            Scene::Bound { gaussians, mesh, config } => {
                let frames = compute_frames(mesh);
                out.par_chunks_mut(stride)
                    .zip(gaussians.par_iter().zip(grads))
                    .try_for_each(|(p, (g, d))| -> Result<()> {
                        let frame = frames
                            .get(g.tri_index as usize)
                            .copied()
                            .flatten()
                            .ok_or_else(|| Error::Topology(format!("no usable frame for face {}", g.tri_index)))?;
                        let l = local_backward(g, &frame, config, d);
                        write_common(p, &l.local_mean, &l.local_rotation, &l.local_log_scale, l.opacity_logit, &l.sh);
                        Ok(())
                    })?;
            }
        }
        Ok(out)
    }
}

fn free_backward(g: &FreeGaussian, d: &GlobalGrad, out: &mut [f64]) {
    let o = sigmoid(g.opacity_logit);
    write_common(
        out,
        &d.mean,
        &quat::matrix_backward(g.rotation, &d.rotation),
        &d.scale.component_mul(&g.log_scale.map(f64::exp)),
        d.opacity * o * (1.0 - o),
        &d.sh,
    );
    if let Some(v) = g.normal {
        let len = v.norm();
        if len > 0.0 {
            let n = v / len;
            let dn = (d.normal - n * n.dot(&d.normal)) / len;
            out[59..62].copy_from_slice(dn.as_slice());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::icosphere;
    use crate::splat::init_binding;

    #[test]
    fn params_round_trip() {
        let mesh = icosphere(1, 1.0);
        let cfg = BindingConfig::new(BindingMode::ShapeAware, 3);
        let gaussians = init_binding(&mesh, &cfg).unwrap();
        let mut scene = Scene::Bound { gaussians, mesh, config: cfg };
        let mut p = scene.params();
        assert_eq!(p.len(), scene.len() * BOUND_STRIDE);
        p.iter_mut().enumerate().for_each(|(i, v)| *v += i as f64 * 1e-3);
        scene.set_params(&p);
        assert_eq!(scene.params(), p);

        let mut g = FreeGaussian::new(Vec3::new(1.0, 2.0, 3.0), 0.1, 0.5);
        g.normal = Some(Vec3::z());
        let mut free = Scene::Free { gaussians: vec![g.clone(), g], sh_degree: 1 };
        let mut p = free.params();
        p[60] = 4.0;
        free.set_params(&p);
        assert_eq!(free.params(), p);
    }

    #[test]
    fn groups() {
        assert_eq!(group_of(0), ParamGroup::Mean);
        assert_eq!(group_of(6), ParamGroup::Rotation);
        assert_eq!(group_of(9), ParamGroup::LogScale);
        assert_eq!(group_of(10), ParamGroup::Opacity);
        assert_eq!(group_of(13), ParamGroup::ShDc);
        assert_eq!(group_of(14), ParamGroup::ShRest);
        assert_eq!(group_of(61), ParamGroup::Normal);
    }

    #[test]
    fn mean_rates_follow_adaption() {
        let mesh = icosphere(1, 1.0);
        let frames = compute_frames(&mesh);
        for mode in BindingMode::ALL {
            let cfg = BindingConfig::new(mode, 3);
            let gaussians = init_binding(&mesh, &cfg).unwrap();
            let scene = Scene::Bound { gaussians, mesh: mesh.clone(), config: cfg };
            let k = scene.mean_rate_factors();
            assert_eq!(k.len(), scene.params().len());
            let Scene::Bound { gaussians, .. } = &scene else { unreachable!() };
            for (g, p) in gaussians.iter().zip(k.chunks(BOUND_STRIDE)) {
                let e = frames[g.tri_index as usize].unwrap().adaption;
                for a in 0..3 {
                    let want = if mode == BindingMode::ShapeAware { 1.0 / e[a] } else { 1.0 };
                    assert_eq!(p[a], want);
                }
                assert!(p[3..].iter().all(|&v| v == 1.0));
            }
        }
    }
}
