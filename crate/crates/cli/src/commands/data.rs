use std::path::Path;

use serde::Serialize;
use soba_core::augment::{augment_dataset, AugmentConfig, AugmentError, AugmentStrategy, ImageReport};
use soba_core::dataset::{compute_stats, import_soba as import, validate_dataset, DatasetStats, ImportOptions};

use super::{emit, image_root, load_manifest, load_rgb, read, save_png, write};
use crate::args::{AugmentArgs, ImportArgs, StatsArgs, ValidateArgs};
use crate::error::{CliError, CliResult};

pub fn import_soba(a: ImportArgs) -> CliResult {
    let instances = read(&a.instances)?;
    let associations = a.associations.as_deref().map(read).transpose()?;
    let opts = ImportOptions {
        derive_objects: a.derive_objects,
    };
    let ds = import(&instances, associations.as_deref(), &opts).map_err(|e| match &a.associations {
        Some(assoc) => CliError::Data(format!("{} with {}: {e}", a.instances.display(), assoc.display())),
        None => CliError::file(&a.instances, e),
    })?;
    write(&a.out, &ds.to_json())?;
    println!(
        "imported {} images, {} instances, {} associations into {}",
        ds.images().len(),
        ds.instances().len(),
        ds.associations().len(),
        a.out.display()
    );
    Ok(())
}

pub fn validate(a: ValidateArgs) -> CliResult {
    let ds = load_manifest(&a.manifest)?;
    let report = validate_dataset(&ds);
    let mut summary = format!(
        "{}: {} violations, {} warnings\n",
        a.manifest.display(),
        report.violations.len(),
        report.warnings.len()
    );
    for v in report.violations.iter().take(20) {
        summary.push_str(&format!("  {}: {}\n", v.record, v.detail));
    }
    if report.violations.len() > 20 {
        summary.push_str(&format!("  ... {} more\n", report.violations.len() - 20));
    }
    emit(&a.report, &report, &summary)?;
    if report.is_clean() {
        Ok(())
    } else {
        Err(CliError::Data(format!(
            "{}: {} annotation violations",
            a.manifest.display(),
            report.violations.len()
        )))
    }
}

#[derive(Serialize)]
struct StatsReport {
    manifests: Vec<ManifestStats>,
    total_images: usize,
    total_pairs: usize,
    mean_pairs_per_image: f64,
}

#[derive(Serialize)]
struct ManifestStats {
    path: String,
    #[serde(flatten)]
    stats: DatasetStats,
}

pub fn stats(a: StatsArgs) -> CliResult {
    let mut manifests = Vec::new();
    for path in &a.manifest {
        let ds = load_manifest(path)?;
        manifests.push(ManifestStats {
            path: path.display().to_string(),
            stats: compute_stats(&ds),
        });
    }
    let total_images: usize = manifests.iter().map(|m| m.stats.image_count).sum();
    let total_pairs: usize = manifests.iter().map(|m| m.stats.pair_count).sum();
    let mean = if total_images == 0 {
        0.0
    } else {
        total_pairs as f64 / total_images as f64
    };
    let mut summary = String::new();
    for m in &manifests {
        summary.push_str(&format!(
            "{}: {} images / {} pairs ({:.2} pairs per image)\n",
            m.path, m.stats.image_count, m.stats.pair_count, m.stats.mean_pairs_per_image
        ));
    }
    if manifests.len() > 1 {
        summary.push_str(&format!(
            "total: {total_images} images / {total_pairs} pairs ({mean:.2} pairs per image)\n"
        ));
    }
    let report = StatsReport {
        manifests,
        total_images,
        total_pairs,
        mean_pairs_per_image: mean,
    };
    emit(&a.report, &report, &summary)
}

#[derive(Serialize)]
struct AugmentReport<'a> {
    strategy: &'static str,
    seed: u64,
    probability: f64,
    images: usize,
    pastes: usize,
    pairs_before: usize,
    pairs_after: usize,
    violations: usize,
    per_image: &'a [ImageReport],
}

pub fn augment(a: AugmentArgs) -> CliResult {
    let ds = load_manifest(&a.input)?;
    let root = image_root(&a.images, &a.input);
    let strategy: AugmentStrategy = a.strategy.into();
    let cfg = AugmentConfig {
        strategy,
        seed: a.seed,
        probability: a.prob,
    };
    let out = augment_dataset(&ds, &cfg, |img| {
        let path = root.join(&img.file_name);
        load_rgb(&path).map_err(|e| AugmentError::Image {
            image_id: img.id,
            file: path.display().to_string(),
            reason: e.to_string(),
        })
    })
    .map_err(|e| CliError::file(&a.input, e))?;

    std::fs::create_dir_all(&a.out).map_err(|e| CliError::file(&a.out, e))?;
    for img in out.dataset.images() {
        let dest = a.out.join(&img.file_name);
        if let Some(parent) = dest.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::file(parent, e))?;
        }
        match out.images.get(&img.id) {
            Some(pixels) => save_png(&dest, pixels)?,
            None => copy_image(&root.join(&img.file_name), &dest)?,
        }
    }
    let manifest = a.out.join("manifest.json");
    write(&manifest, &out.dataset.to_json())?;

    let check = validate_dataset(&out.dataset);
    let report = AugmentReport {
        strategy: strategy.as_str(),
        seed: a.seed,
        probability: a.prob,
        images: out.dataset.images().len(),
        pastes: out.pastes(),
        pairs_before: ds.associations().len(),
        pairs_after: out.dataset.associations().len(),
        violations: check.violations.len(),
        per_image: &out.reports,
    };
    let summary = format!(
        "{} pastes over {} images; {} -> {} pairs; {} violations; wrote {}\n",
        report.pastes,
        report.images,
        report.pairs_before,
        report.pairs_after,
        report.violations,
        manifest.display()
    );
    emit(&a.report, &report, &summary)
}

fn copy_image(from: &Path, to: &Path) -> CliResult {
    if from == to {
        return Ok(());
    }
    let bytes = read(from)?;
    write(to, &bytes)
}
