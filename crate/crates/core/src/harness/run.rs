use std::time::Instant;

use serde::Serialize;

use super::config::{ConsistencyRegion, ExperimentConfig, FieldKind, Inversion, StrategyKind, SweepParam};
use super::output::{fingerprint, RunRow, Timing};
use super::seeds::{draw_source, nsli_seed, sample_seed};
use super::svg::{Component, Figure, Polyline, Stroke};
use super::HarnessError;
use crate::editing::{analytic_nfe, edit, EditResult, GuidanceMode, Mask};
use crate::fields::{straighten, with_aux_hook, AffineField, AuxHook, GaussianModel, GaussianRfField, VpFlowField};
use crate::flow::{ddim_invert, ddim_sample, invert, sample, Condition, Latent, NfeCounter, TimeGrid};
use crate::metrics::{alignment, consistency, default_peak, mse, psnr};

/// Trajectories drawn per figure.
const MAX_PLOTTED: usize = 16;
/// Sub-steps per grid step for the plotted sampling curves.
const PLOT_SUBSTEPS: usize = 16;

#[derive(Clone, Debug, Default)]
pub struct RunOutput {
    /// Sorted by (fingerprint, sample).
    pub rows: Vec<RunRow>,
    pub timings: Vec<Timing>,
    pub figures: Vec<(String, Figure)>,
    /// In variant order.
    pub summaries: Vec<VariantSummary>,
    pub checks: Vec<Check>,
}

impl RunOutput {
    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    fn sort(&mut self) {
        self.rows
            .sort_by(|a, b| (&a.fingerprint, a.sample).cmp(&(&b.fingerprint, b.sample)));
        self.timings
            .sort_by(|a, b| (&a.fingerprint, a.sample).cmp(&(&b.fingerprint, b.sample)));
    }
}

/// Per-variant means over samples.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VariantSummary {
    pub variant: String,
    pub fingerprint: String,
    pub samples: usize,
    pub mean_mse: f64,
    pub mean_consistency: f64,
    pub mean_alignment: f64,
    pub mean_roundtrip: f64,
}

impl VariantSummary {
    fn of(variant: &str, fingerprint: &str, rows: &[RunRow]) -> Self {
        let n = rows.len();
        let mean = |f: fn(&RunRow) -> f64| {
            if n == 0 {
                f64::NAN
            } else {
                rows.iter().map(f).sum::<f64>() / n as f64
            }
        };
        Self {
            variant: variant.to_string(),
            fingerprint: fingerprint.to_string(),
            samples: n,
            mean_mse: mean(|r| r.mse),
            mean_consistency: mean(|r| r.consistency),
            mean_alignment: mean(|r| r.alignment),
            mean_roundtrip: mean(|r| r.roundtrip),
        }
    }
}

/// A directional claim evaluated on a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Everything derived from one config that every sample shares.
struct Setup {
    cfg: ExperimentConfig,
    fingerprint: String,
    master: u64,
    model: GaussianModel,
    grid: TimeGrid,
    c_src: Condition,
    c_tgt: Condition,
    base: Box<dyn AffineField>,
    field: Box<dyn AffineField>,
    vp: Option<VpFlowField>,
    region: Mask,
    peak: f64,
}

impl Setup {
    fn new(cfg: &ExperimentConfig) -> Result<Self, HarnessError> {
        cfg.validate()?;
        let model = cfg.model()?;
        let grid = cfg.grid()?;
        let c_src = model.condition(&cfg.run.source)?;
        let c_tgt = model.condition(&cfg.run.target)?;
        let vp = match cfg.field.kind {
            FieldKind::Vp => Some(VpFlowField::new(model.clone(), cfg.schedule()?)),
            FieldKind::Rf => None,
        };
        let make_base = || -> Box<dyn AffineField> {
            match &vp {
                Some(vp) => Box::new(vp.clone()),
                None => Box::new(GaussianRfField::new(model.clone())),
            }
        };
        let field: Box<dyn AffineField> = if cfg.field.straighten {
            Box::new(straighten(make_base(), &grid, &model.conditions())?)
        } else {
            make_base()
        };
        let region = match cfg.metrics.consistency {
            ConsistencyRegion::All => Mask::zeros(model.dim()),
            ConsistencyRegion::Unedited => Mask::new(
                model
                    .mean(&c_src)?
                    .iter()
                    .zip(model.mean(&c_tgt)?)
                    .map(|(a, b)| if a == b { 0.0 } else { 1.0 })
                    .collect(),
            )?,
        };
        Ok(Self {
            fingerprint: fingerprint(cfg),
            master: cfg.seed()?,
            peak: cfg.metrics.peak.unwrap_or_else(|| default_peak(&model)),
            base: make_base(),
            cfg: cfg.clone(),
            model,
            grid,
            c_src,
            c_tgt,
            field,
            vp,
            region,
        })
    }

    fn k_start(&self) -> usize {
        self.cfg.grid.k_start
    }

    fn source(&self, sample: usize) -> Result<(u64, Latent), HarnessError> {
        let seed = sample_seed(self.master, sample);
        Ok((seed, draw_source(&self.model, &self.c_src, seed)?))
    }

    /// Configured edit of one sample. The hook reference is the source-side
    /// inversion of the editing field; its evaluations are counted.
    fn edit_sample(&self, z0: &Latent, seed: u64) -> Result<(EditResult, u64, u64), HarnessError> {
        let k = self.k_start();
        let g = self.cfg.guidance();
        let strategy = self.cfg.strategy(nsli_seed(seed));
        let s = self.cfg.field.hook_scale;
        let field: &dyn AffineField = &*self.field;
        let mut expected = analytic_nfe(&strategy, &g, k);
        let result = if s > 0.0 {
            let mut nfe = NfeCounter::new();
            let rec = invert(field, z0, &self.c_src, &self.grid, k, &mut nfe)?;
            let hook = AuxHook::from_trajectory(&self.grid.times()[..=k], rec.latents(), s)?;
            let hooked = with_aux_hook(field, hook)?;
            let mut r = edit(&hooked, &self.grid, z0, &self.c_src, &self.c_tgt, &strategy, &g, k)?;
            r.nfe += nfe.evaluations();
            expected += k as u64;
            r
        } else {
            edit(field, &self.grid, z0, &self.c_src, &self.c_tgt, &strategy, &g, k)?
        };
        let nfe = result.nfe;
        Ok((result, nfe, expected))
    }

    /// DDIM inversion then DDIM sampling on the curved noise-prediction field.
    fn ddim_roundtrip(&self, z0: &Latent) -> Result<(Vec<Latent>, Vec<Latent>, u64, u64), HarnessError> {
        let vp = self
            .vp
            .as_ref()
            .ok_or_else(|| HarnessError::Config("DDIM needs field.kind = \"vp\"".into()))?;
        let k = self.k_start();
        let mut nfe = NfeCounter::new();
        let rec = ddim_invert(vp, z0, &self.c_src, &self.grid, k, &mut nfe)?;
        let traj = ddim_sample(vp, &rec.latents()[k], &self.c_src, &self.grid, k, &mut nfe)?;
        Ok((rec.latents().to_vec(), traj, nfe.evaluations(), 2 * k as u64))
    }

    #[allow(clippy::too_many_arguments)]
    fn row(
        &self,
        experiment: &str,
        variant: &str,
        sample: usize,
        seed: u64,
        z0: &Latent,
        out: &Latent,
        nfe: u64,
        nfe_expected: u64,
        norms: &[f64],
    ) -> Result<RunRow, HarnessError> {
        if nfe != nfe_expected {
            return Err(HarnessError::Assertion(format!(
                "{experiment}/{variant} sample {sample}: {nfe} field evaluations, expected {nfe_expected}"
            )));
        }
        let c = &self.cfg;
        Ok(RunRow {
            experiment: experiment.into(),
            variant: variant.into(),
            fingerprint: self.fingerprint.clone(),
            master_seed: self.master,
            sample,
            sample_seed: seed,
            field: label(&c.field.kind),
            straightened: c.field.straighten,
            inversion: label(&c.method.inversion),
            strategy: label(&c.method.strategy),
            guidance: label(&c.method.guidance),
            w: c.method.w,
            alpha: c.method.alpha,
            mask: c.method.mask,
            mask_mode: label(&c.method.mask_mode),
            hook_scale: c.field.hook_scale,
            n_steps: c.grid.n_steps,
            k_start: c.grid.k_start,
            mse: mse(out, z0)?,
            psnr: psnr(out, z0, self.peak)?,
            consistency: consistency(out, z0, &self.region)?,
            alignment: alignment(out, &self.model, &self.c_tgt)?,
            alignment_source: alignment(z0, &self.model, &self.c_tgt)?,
            roundtrip: out.distance(z0),
            nfe,
            nfe_expected,
            guidance_norms: norms.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(";"),
        })
    }

    fn components(&self) -> Vec<Component> {
        self.model
            .means()
            .iter()
            .filter(|(_, m)| m.len() == 2)
            .map(|(id, m)| Component {
                label: id.clone(),
                center: [m[0], m[1]],
                sigma: self.model.sigma(),
            })
            .collect()
    }
}

/// Serde name of a unit enum variant.
fn label<T: Serialize>(value: &T) -> String {
    match serde_json::to_value(value) {
        Ok(serde_json::Value::String(s)) => s,
        other => format!("{other:?}"),
    }
}

fn points(latents: &[Latent]) -> Vec<[f64; 2]> {
    latents
        .iter()
        .map(|z| {
            let v = z.as_slice();
            [v[0], v[1]]
        })
        .collect()
}

fn run_edit_variant(
    cfg: &ExperimentConfig,
    experiment: &str,
    variant: &str,
    out: &mut RunOutput,
) -> Result<(), HarnessError> {
    let setup = Setup::new(cfg)?;
    let plot = setup.model.dim() == 2;
    let mut figure = Figure {
        title: format!("{experiment} {variant}"),
        components: setup.components(),
        polylines: Vec::new(),
    };
    let first = out.rows.len();
    for i in 0..cfg.run.samples {
        let start = Instant::now();
        let (seed, z0) = setup.source(i)?;
        let (result, nfe, expected) = setup.edit_sample(&z0, seed)?;
        let row = setup.row(
            experiment,
            variant,
            i,
            seed,
            &z0,
            &result.output,
            nfe,
            expected,
            &result.per_step_guidance_norms,
        )?;
        out.rows.push(row);
        out.timings.push(Timing {
            fingerprint: setup.fingerprint.clone(),
            sample: i,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        if plot && i < MAX_PLOTTED {
            figure.polylines.push(Polyline {
                stroke: Stroke::Inversion,
                points: points(&result.source_trajectory),
            });
            figure.polylines.push(Polyline {
                stroke: Stroke::Regeneration,
                points: points(&result.trajectory),
            });
        }
    }
    out.summaries
        .push(VariantSummary::of(variant, &setup.fingerprint, &out.rows[first..]));
    if plot {
        out.figures.push((variant.to_string(), figure));
    }
    Ok(())
}

/// Inversion followed by regeneration under the source condition, per
/// inversion method. DDIM rows use the curved field with plain sampling.
pub fn reconstruct(cfg: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    let mut base = cfg.clone();
    base.run.target = base.run.source.clone();
    let methods: &[Inversion] = match cfg.method.inversion {
        Inversion::Perrfi => &[Inversion::Perrfi],
        Inversion::Ddim => &[Inversion::Ddim],
        Inversion::Both => &[Inversion::Perrfi, Inversion::Ddim],
    };
    let mut out = RunOutput::default();
    for &method in methods {
        let mut vcfg = base.clone();
        vcfg.method.inversion = method;
        if method == Inversion::Perrfi {
            run_edit_variant(&vcfg, "reconstruct", "perrfi", &mut out)?;
            continue;
        }
        vcfg.method.strategy = StrategyKind::Nli;
        vcfg.method.guidance = GuidanceMode::None;
        vcfg.method.mask = false;
        vcfg.field.hook_scale = 0.0;
        vcfg.field.straighten = false;
        let setup = Setup::new(&vcfg)?;
        let first = out.rows.len();
        let mut figure = Figure {
            title: "reconstruct ddim".into(),
            components: setup.components(),
            polylines: Vec::new(),
        };
        for i in 0..vcfg.run.samples {
            let start = Instant::now();
            let (seed, z0) = setup.source(i)?;
            let (inv, regen, nfe, expected) = setup.ddim_roundtrip(&z0)?;
            let output = regen.last().expect("non-empty trajectory");
            let norms = vec![0.0; setup.k_start()];
            out.rows
                .push(setup.row("reconstruct", "ddim", i, seed, &z0, output, nfe, expected, &norms)?);
            out.timings.push(Timing {
                fingerprint: setup.fingerprint.clone(),
                sample: i,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            });
            if setup.model.dim() == 2 && i < MAX_PLOTTED {
                figure.polylines.push(Polyline {
                    stroke: Stroke::Inversion,
                    points: points(&inv),
                });
                figure.polylines.push(Polyline {
                    stroke: Stroke::Regeneration,
                    points: points(&regen),
                });
            }
        }
        out.summaries
            .push(VariantSummary::of("ddim", &setup.fingerprint, &out.rows[first..]));
        if setup.model.dim() == 2 {
            out.figures.push(("ddim".into(), figure));
        }
    }
    out.sort();
    Ok(out)
}

/// The configured edit over `run.samples` source draws. Checks that the
/// output is closer to the target than the input for at least 95% of them.
pub fn edit_runs(cfg: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    let mut out = RunOutput::default();
    run_edit_variant(cfg, "edit", "edit", &mut out)?;
    if cfg.run.source != cfg.run.target && !out.rows.is_empty() {
        let improved = out.rows.iter().filter(|r| r.alignment > r.alignment_source).count();
        let frac = improved as f64 / out.rows.len() as f64;
        out.checks.push(Check {
            name: "alignment-improves".into(),
            passed: frac >= 0.95,
            detail: format!(
                "{improved}/{} samples moved toward the target ({:.1}%)",
                out.rows.len(),
                100.0 * frac
            ),
        });
    }
    out.sort();
    Ok(out)
}

/// Ablation variants of `cfg`, in output order. `full` is `cfg` itself.
fn ablations(cfg: &ExperimentConfig) -> Vec<(&'static str, ExperimentConfig)> {
    let mut list = vec![("full", cfg.clone())];
    let mut v = cfg.clone();
    v.method.strategy = StrategyKind::Nsli;
    list.push(("nsli", v));
    let mut v = cfg.clone();
    v.method.guidance = GuidanceMode::Pg;
    list.push(("pg", v));
    let mut v = cfg.clone();
    v.method.mask = false;
    list.push(("no-mask", v));
    let mut v = cfg.clone();
    v.field.hook_scale = 0.0;
    list.push(("no-hook", v));
    let mut v = cfg.clone();
    v.method.strategy = StrategyKind::Nli;
    v.method.guidance = GuidanceMode::None;
    v.method.mask = false;
    v.field.hook_scale = 0.0;
    list.push(("nli", v));
    list
}

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Ablation matrix with paired seeds. Directional checks compare `full`
/// against each ablation that actually differs from it.
pub fn compare(cfg: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    let mut out = RunOutput::default();
    for (name, vcfg) in ablations(cfg) {
        run_edit_variant(&vcfg, "compare", name, &mut out)?;
    }
    let by_name = |n: &str| out.summaries.iter().find(|s| s.variant == n).cloned();
    let full = by_name("full").expect("full variant present");
    let mut checks = Vec::new();
    let mut better = |name: &str, other: &str| {
        if let Some(o) = by_name(other).filter(|o| o.fingerprint != full.fingerprint) {
            checks.push(Check {
                name: name.into(),
                passed: full.mean_consistency < o.mean_consistency,
                detail: format!(
                    "consistency full {:.6} vs {other} {:.6}",
                    full.mean_consistency, o.mean_consistency
                ),
            });
            Some(o)
        } else {
            None
        }
    };
    better("ili-beats-nsli", "nsli");
    let pg = better("dpg-beats-pg", "pg");
    better("mask-improves-consistency", "no-mask");
    better("hook-improves-consistency", "no-hook");
    if let Some(pg) = pg {
        let gap = rel_gap(full.mean_alignment, pg.mean_alignment);
        checks.push(Check {
            name: "dpg-pg-alignment-within-5pct".into(),
            passed: gap <= 0.05,
            detail: format!(
                "alignment full {:.6} vs pg {:.6} (relative gap {:.2}%)",
                full.mean_alignment,
                pg.mean_alignment,
                100.0 * gap
            ),
        });
    }
    out.checks = checks;
    out.sort();
    Ok(out)
}

fn apply_sweep(cfg: &ExperimentConfig, param: SweepParam, value: f64) -> Result<ExperimentConfig, HarnessError> {
    let mut v = cfg.clone();
    match param {
        SweepParam::W => v.method.w = value,
        SweepParam::Alpha => v.method.alpha = value,
        SweepParam::S => v.field.hook_scale = value,
        SweepParam::NSteps => {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(HarnessError::Config(format!(
                    "n_steps sweep value {value} is not a positive integer"
                )));
            }
            v.grid.n_steps = value as usize;
            v.grid.k_start = value as usize;
        }
    }
    Ok(v)
}

fn monotone(values: &[f64], increasing: bool) -> bool {
    values
        .windows(2)
        .all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] })
}

/// One variant per `sweep.values` entry (ascending). Checks the documented
/// directions: larger `w` trades consistency for alignment; larger `alpha`,
/// `s` and `n_steps` improve consistency.
pub fn sweep(cfg: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    let param = cfg.sweep.param;
    let values = &cfg.sweep.values;
    if values.len() < 2 || values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(HarnessError::Config(
            "sweep.values needs at least two strictly increasing entries".into(),
        ));
    }
    let mut out = RunOutput::default();
    for &value in values {
        let vcfg = apply_sweep(cfg, param, value)?;
        run_edit_variant(&vcfg, "sweep", &format!("{}={value}", param.label()), &mut out)?;
    }
    let cons: Vec<f64> = out.summaries.iter().map(|s| s.mean_consistency).collect();
    let align: Vec<f64> = out.summaries.iter().map(|s| s.mean_alignment).collect();
    let worsens = param == SweepParam::W;
    out.checks.push(Check {
        name: format!(
            "{}-consistency-{}",
            param.label(),
            if worsens { "worsens" } else { "improves" }
        ),
        passed: monotone(&cons, worsens),
        detail: format!("mean consistency {cons:?}"),
    });
    if worsens {
        out.checks.push(Check {
            name: "w-alignment-improves".into(),
            passed: monotone(&align, true),
            detail: format!("mean alignment {align:?}"),
        });
    }
    out.sort();
    Ok(out)
}

/// Straight versus curved sampling for the first source draws: the PerRFI
/// inversion (dashed), then sampling back from its endpoint on the
/// straightened field and on the curved base field, each with
/// `16 * n_steps` sub-steps.
pub fn plot_figure(cfg: &ExperimentConfig) -> Result<Figure, HarnessError> {
    let mut scfg = cfg.clone();
    scfg.field.straighten = true;
    let setup = Setup::new(&scfg)?;
    if setup.model.dim() != 2 {
        return Err(HarnessError::Config(format!(
            "plot needs a 2-D model, got dimension {}",
            setup.model.dim()
        )));
    }
    let n = setup.grid.n_steps();
    let fine = TimeGrid::uniform(n * PLOT_SUBSTEPS, 0.0, 1.0, cfg.field.windows)?;
    let mut figure = Figure {
        title: "straightened vs curved sampling".into(),
        components: setup.components(),
        polylines: Vec::new(),
    };
    let mut nfe = NfeCounter::new();
    for i in 0..cfg.run.samples.min(MAX_PLOTTED) {
        let (_, z0) = setup.source(i)?;
        let rec = invert(&*setup.field, &z0, &setup.c_src, &setup.grid, n, &mut nfe)?;
        let z1 = &rec.latents()[n];
        let straight = sample(&*setup.field, z1, &setup.c_src, &fine, n * PLOT_SUBSTEPS, &mut nfe)?;
        let curved = sample(&*setup.base, z1, &setup.c_src, &fine, n * PLOT_SUBSTEPS, &mut nfe)?;
        figure.polylines.push(Polyline {
            stroke: Stroke::Inversion,
            points: points(rec.latents()),
        });
        figure.polylines.push(Polyline {
            stroke: Stroke::Curved,
            points: points(&curved),
        });
        figure.polylines.push(Polyline {
            stroke: Stroke::Straight,
            points: points(&straight),
        });
    }
    Ok(figure)
}

pub fn plot(cfg: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    Ok(RunOutput {
        figures: vec![("flow".into(), plot_figure(cfg)?)],
        ..Default::default()
    })
}
