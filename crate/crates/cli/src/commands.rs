use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use log::{info, warn};
use meshsplat::fit::{init_free_gaussians, optimize_with, psnr, ssim, write_trace, FitOptions, Scene, Stage, TrainView};
use meshsplat::geometry::TriMesh;
use meshsplat::io::{
    checkpoint_kind, read_camera_set, read_checkpoint, read_free_checkpoint, read_frame_sequence, read_mesh,
    read_rgb_and_mask, resize_image, write_checkpoint, write_free_checkpoint, write_image, write_mesh,
    write_oriented_points, write_u16_image, CameraEntry, Checkpoint, CheckpointKind, FreeCheckpoint, SceneBundle,
};
use meshsplat::meshx::{build_occupancy, export_oriented_points, marching_cube_with, VertexPlacement};
use meshsplat::render::{rasterize, Camera, RenderOutput};
use meshsplat::splat::{adapt_all, init_binding, to_global_all, BindingConfig, BindingMode, GlobalGaussian, LocalGaussian};
use meshsplat::{Image, Vec3};

use crate::args::{BindArgs, EvalArgs, ExtractArgs, ExtractMethod, FitArgs, Placement, RenderArgs};

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn ensure_parent(path: &Path) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn scaled_size(cam: &Camera, res: Option<u32>) -> (usize, usize) {
    match res {
        Some(w) => {
            let w = w as usize;
            let h = ((w * cam.height) as f64 / cam.width as f64).round().max(1.0) as usize;
            (w, h)
        }
        None => (cam.width, cam.height),
    }
}

pub fn bind(a: &BindArgs) -> anyhow::Result<()> {
    let mesh = read_mesh(&a.mesh)?;
    let mut config = BindingConfig::new(a.mode, a.per_tri as usize);
    config.beta = a.beta;
    config.flat_eps = a.flat_eps;
    config.sh_degree = a.sh_degree;
    config.validate()?;
    let gaussians = init_binding(&mesh, &config)?;
    ensure_parent(&a.out)?;
    write_checkpoint(&Checkpoint { config, gaussians }, &a.out)?;
    println!(
        "bound {} gaussians to {} faces ({}, N={})",
        mesh.valid_faces().len() * a.per_tri as usize,
        mesh.face_count(),
        a.mode,
        a.per_tri
    );
    Ok(())
}

fn load_views(entries: &[CameraEntry], bg: [f64; 3], res: Option<u32>) -> anyhow::Result<Vec<TrainView>> {
    entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let path = e.image.as_ref().with_context(|| format!("camera {i} has no training image"))?;
            let (mut image, mut mask) = read_rgb_and_mask(path, bg)?;
            let (w, h) = scaled_size(&e.camera, res);
            let camera = e.camera.resized(w, h);
            if image.width != e.camera.width || image.height != e.camera.height {
                bail!(
                    "{} is {}x{} but its camera is {}x{}",
                    path.display(),
                    image.width,
                    image.height,
                    e.camera.width,
                    e.camera.height
                );
            }
            if (w, h) != (image.width, image.height) {
                image = resize_image(&image, w, h)?;
                mask = resize_image(&mask, w, h)?;
                mask.data.iter_mut().for_each(|v| *v = if *v > 0.5 { 1.0 } else { 0.0 });
            }
            Ok(TrainView::new(image, mask, camera)?)
        })
        .collect()
}

fn bound_scene(bundle: &SceneBundle) -> anyhow::Result<Scene> {
    let mesh_path = bundle.mesh.as_ref().context("a mesh-bound scene needs `mesh` in the bundle")?;
    let mesh = read_mesh(mesh_path)?;
    let ckpt = match &bundle.checkpoint {
        Some(p) => read_checkpoint(p)?,
        None => {
            let b = &bundle.binding;
            let mut config = BindingConfig::new(b.mode.unwrap_or(BindingMode::ShapeAware), b.per_tri.unwrap_or(3));
            config.beta = b.beta.unwrap_or(config.beta);
            config.flat_eps = b.flat_eps.unwrap_or(config.flat_eps);
            config.sh_degree = b.sh_degree.unwrap_or(config.sh_degree);
            config.validate()?;
            let gaussians = init_binding(&mesh, &config)?;
            Checkpoint { config, gaussians }
        }
    };
    ckpt.validate_against(&mesh)?;
    Ok(Scene::Bound {
        gaussians: ckpt.gaussians,
        mesh,
        config: ckpt.config,
    })
}

fn save_scene(scene: Scene, path: &Path) -> anyhow::Result<()> {
    ensure_parent(path)?;
    match scene {
        Scene::Bound { gaussians, config, .. } => write_checkpoint(&Checkpoint { config, gaussians }, path)?,
        Scene::Free { gaussians, sh_degree } => write_free_checkpoint(&FreeCheckpoint { sh_degree, gaussians }, path)?,
    }
    Ok(())
}

pub fn fit(a: &FitArgs, seed: u64) -> anyhow::Result<()> {
    let bundle = SceneBundle::read(&a.scene)?;
    let entries = read_camera_set(&bundle.cameras)?;
    let views = load_views(&entries, a.bg, a.res)?;
    let mut scene = match a.stage {
        Stage::Two => bound_scene(&bundle)?,
        Stage::One => match &bundle.checkpoint {
            Some(p) => {
                if checkpoint_kind(p)? != CheckpointKind::Free {
                    bail!("stage 1 needs a free-Gaussian checkpoint, {} is mesh-bound", p.display());
                }
                let c = read_free_checkpoint(p)?;
                Scene::Free {
                    gaussians: c.gaussians,
                    sh_degree: c.sh_degree,
                }
            }
            None => Scene::Free {
                gaussians: init_free_gaussians(a.init_count, Vec3::zeros(), a.init_radius, seed)?,
                sh_degree: a.sh_degree,
            },
        },
    };
    let trace_path = a.trace.clone().unwrap_or_else(|| with_suffix(&a.out, ".loss.txt"));
    ensure_parent(&trace_path)?;
    if a.steps == 0 {
        match &bundle.checkpoint {
            Some(p) => {
                ensure_parent(&a.out)?;
                fs::copy(p, &a.out).with_context(|| format!("copying {} to {}", p.display(), a.out.display()))?;
            }
            None => save_scene(scene, &a.out)?,
        }
        fs::write(&trace_path, "").with_context(|| format!("writing {}", trace_path.display()))?;
        println!("steps=0: wrote {}", a.out.display());
        return Ok(());
    }

    let mut opts = FitOptions::new(a.stage, a.steps);
    opts.seed = seed;
    opts.background = a.bg;
    let preview_dir = (!a.no_preview).then(|| a.preview_dir.clone().unwrap_or_else(|| with_suffix(&a.out, ".previews")));
    if let Some(dir) = &preview_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let every = (a.steps / 20).max(1);
    let preview_cam = views[0].camera.clone();
    let mut preview_err: Option<anyhow::Error> = None;
    let trace = optimize_with(&mut scene, &views, &opts, |rec, s| {
        let step = rec.step + 1;
        if step % every != 0 && step != a.steps {
            return;
        }
        info!("{rec}");
        let Some(dir) = &preview_dir else { return };
        if preview_err.is_some() {
            return;
        }
        let res = s
            .globals()
            .map_err(anyhow::Error::from)
            .and_then(|g| {
                let out = rasterize(&g, &preview_cam, a.bg);
                Ok(write_image(&out.color, &dir.join(format!("step_{step:06}.png")))?)
            });
        if let Err(e) = res {
            preview_err = Some(e);
        }
    });
    let trace = trace?;
    if let Some(e) = preview_err {
        return Err(e.context("writing preview"));
    }
    let mut file = fs::File::create(&trace_path).with_context(|| format!("creating {}", trace_path.display()))?;
    write_trace(&trace, &mut file).with_context(|| format!("writing {}", trace_path.display()))?;

    let globals = scene.globals()?;
    let mean_psnr = views
        .iter()
        .map(|v| psnr(&rasterize(&globals, &v.camera, a.bg).color, &v.image))
        .sum::<meshsplat::Result<f64>>()?
        / views.len() as f64;
    let last = trace.last().map(|r| r.total).unwrap_or(f64::NAN);
    save_scene(scene, &a.out)?;
    println!("steps={} final_loss={last:.6e} train_psnr={mean_psnr:.4} out={}", a.steps, a.out.display());
    Ok(())
}

enum Loaded {
    Bound {
        gaussians: Vec<LocalGaussian>,
        mesh: TriMesh,
        config: BindingConfig,
    },
    Free(Vec<GlobalGaussian>),
}

fn load_for_render(bundle: &SceneBundle) -> anyhow::Result<Loaded> {
    let ckpt = bundle.checkpoint.as_ref().context("rendering needs `checkpoint` in the bundle")?;
    Ok(match checkpoint_kind(ckpt)? {
        CheckpointKind::Bound => {
            let Scene::Bound { gaussians, mesh, config } = bound_scene(bundle)? else { unreachable!() };
            Loaded::Bound { gaussians, mesh, config }
        }
        CheckpointKind::Free => {
            let c = read_free_checkpoint(ckpt)?;
            Loaded::Free(c.gaussians.iter().map(|g| g.to_global(c.sh_degree)).collect())
        }
    })
}

/// Output file names: the camera's image name when all are distinct, otherwise `view_NNNN.png`.
fn view_names(entries: &[CameraEntry]) -> Vec<String> {
    let names: Vec<Option<String>> = entries
        .iter()
        .map(|e| e.image.as_ref().and_then(|p| p.file_stem()).map(|s| format!("{}.png", s.to_string_lossy())))
        .collect();
    let mut unique: Vec<&String> = names.iter().flatten().collect();
    unique.sort();
    unique.dedup();
    if unique.len() == entries.len() {
        names.into_iter().flatten().collect()
    } else {
        (0..entries.len()).map(|i| format!("view_{i:04}.png")).collect()
    }
}

fn write_render(out: &RenderOutput, dir: &Path, name: &str, aux: bool) -> anyhow::Result<()> {
    write_image(&out.color, &dir.join(name))?;
    if aux {
        for sub in ["depth", "normal", "alpha"] {
            fs::create_dir_all(dir.join(sub))?;
        }
        let depth = Image::from_data(
            out.depth.width,
            out.depth.height,
            1,
            out.depth.data.iter().zip(&out.alpha.data).map(|(d, a)| if *a > 0.0 { d / a } else { 0.0 }).collect(),
        )?;
        write_u16_image(&depth, 1000.0, &dir.join("depth").join(name))?;
        let mut normal = out.normal.clone();
        for (i, a) in out.alpha.data.iter().enumerate() {
            for c in 0..3 {
                let v = &mut normal.data[3 * i + c];
                *v = if *a > 0.0 { 0.5 + 0.5 * *v / a } else { 0.0 };
            }
        }
        write_image(&normal, &dir.join("normal").join(name))?;
        write_image(&out.alpha, &dir.join("alpha").join(name))?;
    }
    Ok(())
}

fn render_all(globals: &[GlobalGaussian], cams: &[Camera], names: &[String], a: &RenderArgs, dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (cam, name) in cams.iter().zip(names) {
        write_render(&rasterize(globals, cam, a.bg), dir, name, a.aux)?;
    }
    Ok(())
}

pub fn render(a: &RenderArgs) -> anyhow::Result<()> {
    let bundle = SceneBundle::read(&a.scene)?;
    let cam_path = a.cameras.as_ref().unwrap_or(&bundle.cameras);
    let entries = read_camera_set(cam_path)?;
    let cams: Vec<Camera> = entries
        .iter()
        .map(|e| {
            let (w, h) = scaled_size(&e.camera, a.res);
            e.camera.resized(w, h)
        })
        .collect();
    let names = view_names(&entries);
    let loaded = load_for_render(&bundle)?;
    match &a.frames {
        None => {
            let globals = match &loaded {
                Loaded::Bound { gaussians, mesh, config } => to_global_all(gaussians, mesh, config)?,
                Loaded::Free(g) => g.clone(),
            };
            render_all(&globals, &cams, &names, a, &a.out)?;
            println!("rendered {} views to {}", cams.len(), a.out.display());
        }
        Some(frames_dir) => {
            let Loaded::Bound { gaussians, mesh, config } = &loaded else {
                bail!("--frames needs a mesh-bound checkpoint");
            };
            let frames = read_frame_sequence(frames_dir)?;
            for (k, frame) in frames.iter().enumerate() {
                let globals = adapt_all(gaussians, mesh, frame, config)
                    .with_context(|| format!("adapting to frame index {k}"))?;
                render_all(&globals, &cams, &names, a, &a.out.join(format!("frame_{k:04}")))?;
            }
            println!("rendered {} frames x {} views to {}", frames.len(), cams.len(), a.out.display());
        }
    }
    Ok(())
}

pub fn extract_mesh(a: &ExtractArgs) -> anyhow::Result<()> {
    let ckpt = read_free_checkpoint(&a.ckpt)?;
    ensure_parent(&a.out)?;
    match a.method {
        ExtractMethod::Mc => {
            let points: Vec<Vec3> = ckpt.gaussians.iter().map(|g| g.mean).collect();
            let mesh = if points.is_empty() {
                warn!("checkpoint {} holds no Gaussians; writing an empty mesh", a.ckpt.display());
                TriMesh::empty()
            } else {
                let grid = build_occupancy(&points, a.res, a.tau)?;
                let placement = match a.placement {
                    Placement::Midpoint => VertexPlacement::Midpoint,
                    Placement::Interpolate => VertexPlacement::Interpolate,
                };
                marching_cube_with(&grid, a.iso, placement)?
            };
            write_mesh(&mesh, &a.out)?;
            println!("vertices={} faces={} out={}", mesh.vertex_count(), mesh.face_count(), a.out.display());
        }
        ExtractMethod::PoissonExport => {
            let set = export_oriented_points(&ckpt.gaussians)?;
            write_oriented_points(&set, &a.out)?;
            println!("points={} out={}", set.len(), a.out.display());
        }
    }
    Ok(())
}

fn png_files(dir: &Path) -> anyhow::Result<Vec<String>> {
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if entry.file_type()?.is_file() && name.to_ascii_lowercase().ends_with(".png") {
            names.push(name);
        }
    }
    names.sort();
    Ok(names)
}

fn fmt_psnr(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.4}")
    }
}

pub fn eval(a: &EvalArgs) -> anyhow::Result<()> {
    let names = png_files(&a.renders)?;
    if names.is_empty() {
        bail!("no PNG files in {}", a.renders.display());
    }
    let mut report = String::new();
    let (mut sum_psnr, mut sum_ssim) = (0.0, 0.0);
    for name in &names {
        let gt_path = a.gt.join(name);
        if !gt_path.is_file() {
            bail!("no ground truth for {name} in {}", a.gt.display());
        }
        let (render, _) = read_rgb_and_mask(&a.renders.join(name), a.bg)?;
        let (gt, _) = read_rgb_and_mask(&gt_path, a.bg)?;
        let p = psnr(&render, &gt).with_context(|| format!("comparing {name}"))?;
        let s = ssim(&render, &gt).with_context(|| format!("comparing {name}"))?;
        sum_psnr += p;
        sum_ssim += s;
        report.push_str(&format!("{name} psnr={} ssim={s:.6}\n", fmt_psnr(p)));
    }
    let n = names.len() as f64;
    report.push_str(&format!("mean psnr={} ssim={:.6} count={}\n", fmt_psnr(sum_psnr / n), sum_ssim / n, names.len()));
    print!("{report}");
    std::io::stdout().flush()?;
    if let Some(out) = &a.out {
        ensure_parent(out)?;
        fs::write(out, &report).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}
