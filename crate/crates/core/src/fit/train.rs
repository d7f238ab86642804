use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::adam::{Adam, OptimizerConfig};
use super::loss::{
    l1_loss, l1_loss_grad, mask_entropy_loss, mask_entropy_loss_grad, normal_consistency_loss,
    normal_consistency_loss_grad, ssim_loss, ssim_loss_grad,
};
use super::scene::{ParamGroup, Scene};
use crate::buffer::Image;
use crate::error::{Error, Result};
use crate::render::{backward, pseudo_normal_from_depth, rasterize, Camera, OutputGrads, RenderOutput};

/// Coverage above which pixels take part in the normal loss.
pub const NORMAL_COVERAGE: f64 = 0.5;

/// One supervised view.
#[derive(Clone, Debug)]
pub struct TrainView {
    pub image: Image,
    /// Object mask in `{0, 1}`.
    pub mask: Image,
    pub camera: Camera,
}

impl TrainView {
    pub fn new(image: Image, mask: Image, camera: Camera) -> Result<Self> {
        let shape = (camera.width, camera.height);
        if (image.width, image.height, image.channels) != (shape.0, shape.1, 3) {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}x3", shape.0, shape.1),
                got: image.shape_string(),
            });
        }
        if (mask.width, mask.height, mask.channels) != (shape.0, shape.1, 1) {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}x1", shape.0, shape.1),
                got: mask.shape_string(),
            });
        }
        Ok(Self { image, mask, camera })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    /// Free Gaussians with normals.
    One,
    /// Mesh-bound Gaussians.
    Two,
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" => Ok(Stage::One),
            "2" => Ok(Stage::Two),
            _ => Err(Error::Config(format!("stage must be 1 or 2, got '{s}'"))),
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::One => "1",
            Stage::Two => "2",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub l1: f64,
    pub ssim: f64,
    pub normal: f64,
    pub mask: f64,
}

impl LossWeights {
    pub fn stage1() -> Self {
        Self {
            l1: 1.0,
            ssim: 0.2,
            normal: 0.01,
            mask: 0.1,
        }
    }

    pub fn stage2() -> Self {
        Self {
            l1: 1.0,
            ssim: 0.2,
            normal: 0.0,
            mask: 0.1,
        }
    }

    pub fn for_stage(stage: Stage) -> Self {
        match stage {
            Stage::One => Self::stage1(),
            Stage::Two => Self::stage2(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("l1", self.l1), ("ssim", self.ssim), ("normal", self.normal), ("mask", self.mask)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("loss weight {name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }

    /// Weighted sum of the loss terms.
    pub fn total(&self, t: &LossTerms) -> f64 {
        self.l1 * t.l1 + self.ssim * t.ssim + self.normal * t.normal + self.mask * t.mask
    }
}

/// Unweighted loss components.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossTerms {
    pub l1: f64,
    pub ssim: f64,
    pub normal: f64,
    pub mask: f64,
}

/// One line of the loss trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossRecord {
    pub step: usize,
    pub view: usize,
    pub total: f64,
    pub terms: LossTerms,
}

impl fmt::Display for LossRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "step={} view={} total={:.9e} l1={:.9e} ssim={:.9e} normal={:.9e} mask={:.9e}",
            self.step, self.view, self.total, self.terms.l1, self.terms.ssim, self.terms.normal, self.terms.mask
        )
    }
}

/// Writes one record per line.
pub fn write_trace(records: &[LossRecord], mut out: impl Write) -> std::io::Result<()> {
    for r in records {
        writeln!(out, "{r}")?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitOptions {
    pub stage: Stage,
    pub steps: usize,
    pub weights: LossWeights,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    pub background: [f64; 3],
}

impl FitOptions {
    pub fn new(stage: Stage, steps: usize) -> Self {
        Self {
            stage,
            steps,
            weights: LossWeights::for_stage(stage),
            optimizer: OptimizerConfig::default(),
            seed: 0,
            background: [0.0; 3],
        }
    }
}

fn loss_impl(
    scene: &Scene,
    view: &TrainView,
    weights: &LossWeights,
    background: [f64; 3],
    want_grad: bool,
) -> Result<(LossTerms, Option<Vec<f64>>)> {
    let globals = scene.globals()?;
    let cam = &view.camera;
    let out: RenderOutput = rasterize(&globals, cam, background);
    let with_normal = weights.normal > 0.0;
    let pseudo = with_normal.then(|| pseudo_normal_from_depth(&out.depth, &out.alpha, cam, NORMAL_COVERAGE));
    if !want_grad {
        let terms = LossTerms {
            l1: l1_loss(&out.color, &view.image)?,
            ssim: ssim_loss(&out.color, &view.image)?,
            normal: match &pseudo {
                Some(p) => normal_consistency_loss(&out.normal, p, &out.alpha, NORMAL_COVERAGE)?,
                None => 0.0,
            },
            mask: mask_entropy_loss(&out.alpha, &view.mask)?,
        };
        return Ok((terms, None));
    }
    let (l1, g_l1) = l1_loss_grad(&out.color, &view.image)?;
    let (ssim, g_ssim) = ssim_loss_grad(&out.color, &view.image)?;
    let (mask, g_mask) = mask_entropy_loss_grad(&out.alpha, &view.mask)?;
    let mut color = g_l1;
    for (c, s) in color.data.iter_mut().zip(&g_ssim.data) {
        *c = weights.l1 * *c + weights.ssim * s;
    }
    let mut alpha = g_mask;
    alpha.data.iter_mut().for_each(|v| *v *= weights.mask);
    let (normal, normal_grad) = match &pseudo {
        Some(p) => {
            let (l, mut g) = normal_consistency_loss_grad(&out.normal, p, &out.alpha, NORMAL_COVERAGE)?;
            g.data.iter_mut().for_each(|v| *v *= weights.normal);
            (l, Some(g))
        }
        None => (0.0, None),
    };
    let grads = OutputGrads {
        color: Some(color),
        depth: None,
        normal: normal_grad,
        alpha: Some(alpha),
    };
    let world = backward(&globals, cam, background, &grads)?;
    let flat = scene.chain_gradients(&world)?;
    Ok((LossTerms { l1, ssim, normal, mask }, Some(flat)))
}

/// Loss terms of `scene` against one view.
pub fn scene_loss(scene: &Scene, view: &TrainView, weights: &LossWeights, background: [f64; 3]) -> Result<LossTerms> {
    Ok(loss_impl(scene, view, weights, background, false)?.0)
}

/// Loss terms and the gradient of the weighted total with respect to [`Scene::params`].
///
/// The pseudo-normal target of the normal term is held constant.
pub fn loss_and_gradient(
    scene: &Scene,
    view: &TrainView,
    weights: &LossWeights,
    background: [f64; 3],
) -> Result<(LossTerms, Vec<f64>)> {
    let (t, g) = loss_impl(scene, view, weights, background, true)?;
    Ok((t, g.expect("gradient requested")))
}

/// Central difference `(f(x + h) − f(x − h)) / 2h`.
pub fn finite_diff(mut f: impl FnMut(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Finite-difference estimate of the weighted loss gradient for flat parameter `param`.
pub fn finite_diff_oracle(
    scene: &Scene,
    view: &TrainView,
    weights: &LossWeights,
    background: [f64; 3],
    param: usize,
    h: f64,
) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Config(format!("step must be positive, got {h}")));
    }
    let base = scene.params();
    let mut probe = scene.clone();
    let mut err = None;
    let d = finite_diff(
        |x| {
            let mut p = base.clone();
            p[param] = x;
            probe.set_params(&p);
            match scene_loss(&probe, view, weights, background) {
                Ok(t) => weights.total(&t),
                Err(e) => {
                    err = Some(e);
                    f64::NAN
                }
            }
        },
        base[param],
        h,
    );
    match err {
        Some(e) => Err(e),
        None => Ok(d),
    }
}

fn check_scene(scene: &Scene, views: &[TrainView], opts: &FitOptions) -> Result<()> {
    opts.weights.validate()?;
    match (opts.stage, scene) {
        (Stage::One, Scene::Free { gaussians, .. }) => {
            if opts.weights.normal > 0.0 && gaussians.iter().any(|g| g.normal.is_none()) {
                return Err(Error::MissingNormals);
            }
        }
        (Stage::Two, Scene::Bound { config, .. }) => config.validate()?,
        (Stage::One, _) => return Err(Error::Config("stage 1 optimises free Gaussians".into())),
        (Stage::Two, _) => return Err(Error::Config("stage 2 requires a mesh-bound scene".into())),
    }
    if views.is_empty() && opts.steps > 0 {
        return Err(Error::Config("no training views".into()));
    }
    Ok(())
}

/// Runs the optimiser; see [`optimize_with`].
pub fn optimize(scene: &mut Scene, views: &[TrainView], opts: &FitOptions) -> Result<Vec<LossRecord>> {
    optimize_with(scene, views, opts, |_, _| {})
}

/// Optimises `scene` with one randomly drawn view per step and returns the
/// loss trace. `observer` sees every record and the scene after that step.
///
/// Stage 2 updates local attributes only; the mesh and bindings are never
/// touched. A non-finite loss aborts, leaving the last finite state.
pub fn optimize_with(
    scene: &mut Scene,
    views: &[TrainView],
    opts: &FitOptions,
    mut observer: impl FnMut(&LossRecord, &Scene),
) -> Result<Vec<LossRecord>> {
    check_scene(scene, views, opts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut params = scene.params();
    let groups = scene.param_groups();
    let cfg = &opts.optimizer;
    let mut adam = Adam::new(params.len(), cfg);
    let mut lrs: Vec<f64> = groups
        .iter()
        .map(|g| match g {
            ParamGroup::Mean => cfg.lr_mean,
            ParamGroup::Rotation => cfg.lr_rotation,
            ParamGroup::LogScale => cfg.lr_log_scale,
            ParamGroup::Opacity => cfg.lr_opacity,
            ParamGroup::ShDc => cfg.lr_sh_dc,
            ParamGroup::ShRest => cfg.lr_sh_rest,
            ParamGroup::Normal => cfg.lr_normal,
        })
        .collect();
    let mean_factors = scene.mean_rate_factors();
    let mut trace = Vec::with_capacity(opts.steps);
    for step in 0..opts.steps {
        let view = rng.random_range(0..views.len());
        let (terms, grad) = loss_and_gradient(scene, &views[view], &opts.weights, opts.background)?;
        let total = opts.weights.total(&terms);
        if !total.is_finite() {
            return Err(Error::NonFiniteLoss {
                step,
                detail: format!("{terms:?}"),
            });
        }
        if let Some(bad) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss {
                step,
                detail: format!("non-finite gradient at parameter {bad}"),
            });
        }
        let mean_lr = cfg.mean_lr_at(step, opts.steps);
        for ((lr, g), k) in lrs.iter_mut().zip(&groups).zip(&mean_factors) {
            if *g == ParamGroup::Mean {
                *lr = mean_lr * k;
            }
        }
        adam.step(&mut params, &grad, &lrs);
        scene.set_params(&params);
        let record = LossRecord {
            step,
            view,
            total,
            terms,
        };
        log::debug!("{record}");
        observer(&record, scene);
        trace.push(record);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TriMesh;
    use crate::splat::{init_binding, BindingConfig, BindingMode, FreeGaussian};
    use crate::{Mat3, Vec3};

    fn camera() -> Camera {
        Camera::new(24, 24, 30.0, 30.0, 12.0, 12.0, Mat3::identity(), Vec3::zeros()).unwrap()
    }

    fn free_scene() -> Scene {
        let mut g = FreeGaussian::new(Vec3::new(0.05, -0.02, 2.0), 0.15, 0.6);
        g.sh[0] = [0.3, -0.2, 0.1];
        g.normal = Some(Vec3::new(0.1, 0.2, -1.0));
        Scene::Free {
            gaussians: vec![g],
            sh_degree: 0,
        }
    }

    fn view_of(scene: &Scene, cam: &Camera) -> TrainView {
        let out = rasterize(&scene.globals().unwrap(), cam, [0.0; 3]);
        let mask = Image::from_data(cam.width, cam.height, 1, out.alpha.data.iter().map(|a| (*a > 0.5) as u8 as f64).collect()).unwrap();
        TrainView::new(out.color, mask, cam.clone()).unwrap()
    }

    #[test]
    fn weights_compose_exactly() {
        let t = LossTerms {
            l1: 0.37,
            ssim: 0.21,
            normal: 0.9,
            mask: 0.05,
        };
        assert_eq!(LossWeights::stage1().total(&t), 0.37 + 0.2 * 0.21 + 0.01 * 0.9 + 0.1 * 0.05);
        let t2 = LossTerms { normal: 0.0, ..t };
        assert_eq!(LossWeights::stage2().total(&t2), 0.37 + 0.2 * 0.21 + 0.1 * 0.05);
    }

    #[test]
    fn zero_steps_is_identity() {
        let mut scene = free_scene();
        let before = scene.clone();
        let cam = camera();
        let view = view_of(&scene, &cam);
        let trace = optimize(&mut scene, &[view], &FitOptions::new(Stage::One, 0)).unwrap();
        assert!(trace.is_empty());
        assert_eq!(scene, before);
    }

    #[test]
    fn stage_mismatch_is_rejected() {
        let mut scene = free_scene();
        let view = view_of(&scene, &camera());
        assert!(optimize(&mut scene, &[view], &FitOptions::new(Stage::Two, 1)).is_err());
    }

    #[test]
    fn fixed_point_stays_put() {
        // the target is the initial render so only the mask term has any pull
        let mut scene = free_scene();
        let cam = camera();
        let out = rasterize(&scene.globals().unwrap(), &cam, [0.0; 3]);
        let view = TrainView::new(out.color.clone(), out.alpha.clone(), cam).unwrap();
        let mut opts = FitOptions::new(Stage::One, 5);
        opts.weights.mask = 0.0;
        opts.weights.normal = 0.0;
        let before = scene.params();
        let trace = optimize(&mut scene, &[view], &opts).unwrap();
        for r in &trace {
            assert!(r.total < 1e-9, "{r}");
        }
        for (a, b) in scene.params().iter().zip(&before) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn gradient_matches_oracle() {
        let scene = free_scene();
        let cam = camera();
        let mut target = free_scene();
        if let Scene::Free { gaussians, .. } = &mut target {
            gaussians[0].mean.x += 0.03;
            gaussians[0].sh[0][1] += 0.4;
            gaussians[0].log_scale.y += 0.2;
        }
        let view = view_of(&target, &cam);
        let w = LossWeights::stage1();
        let (_, g) = loss_and_gradient(&scene, &view, &w, [0.0; 3]).unwrap();
        for i in [0, 1, 2, 3, 4, 7, 8, 10, 11, 12, 13] {
            let fd = finite_diff_oracle(&scene, &view, &w, [0.0; 3], i, 1e-6).unwrap();
            assert!((fd - g[i]).abs() <= 1e-3 * fd.abs().max(g[i].abs()) + 1e-7, "{i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn finite_diff_of_quadratic() {
        assert!((finite_diff(|p| p * p, 3.0, 1e-4) - 6.0).abs() < 1e-6);
    }

    #[test]
    fn stage_two_keeps_mesh_and_bindings() {
        let mesh = TriMesh::new(
            vec![Vec3::new(-0.5, -0.5, 2.0), Vec3::new(0.5, -0.5, 2.0), Vec3::new(0.0, 0.5, 2.2)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let mut cfg = BindingConfig::new(BindingMode::ShapeAware, 3);
        cfg.sh_degree = 1;
        let gaussians = init_binding(&mesh, &cfg).unwrap();
        let mut scene = Scene::Bound {
            gaussians,
            mesh: mesh.clone(),
            config: cfg,
        };
        let cam = camera();
        let target = Image::filled(24, 24, 3, 0.8);
        let view = TrainView::new(target, Image::filled(24, 24, 1, 1.0), cam).unwrap();
        let trace = optimize(&mut scene, &[view], &FitOptions::new(Stage::Two, 20)).unwrap();
        assert!(trace.last().unwrap().total < trace[0].total);
        let Scene::Bound { gaussians, mesh: after, .. } = &scene else { unreachable!() };
        assert_eq!(after, &mesh);
        for (i, g) in gaussians.iter().enumerate() {
            assert_eq!(g.tri_index, 0);
            assert_eq!(g.slot as usize, i);
        }
    }

    #[test]
    fn trace_lines() {
        let r = LossRecord {
            step: 3,
            view: 1,
            total: 0.5,
            terms: LossTerms::default(),
        };
        let mut buf = Vec::new();
        write_trace(&[r, r], &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().count(), 2);
        assert!(s.starts_with("step=3 view=1 total=5.000000000e-1"));
    }
}
