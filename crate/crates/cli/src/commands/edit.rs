use std::path::Path;
use std::process::Command;

use serde::Serialize;
use soba_core::apps::{
    fill_nearest, image_light, removal_mask, transfer_object, LightDirection, Placement, TransferSource,
};
use soba_core::association::{PairConfig, Point};
use soba_core::dataset::{AssociationRecord, Dataset};
use soba_core::mask::{mask_to_box_or_zero, BBox, BitMask, RleMask};

use super::{emit, image_root, load_manifest, load_predictions, load_rgb, save_png};
use crate::args::{LightArgs, RemoveArgs, TransferArgs};
use crate::error::{CliError, CliResult};

pub fn light(a: LightArgs) -> CliResult {
    let bundle = load_predictions(&a.pred, &PairConfig::default())?;
    let pairs: Vec<(u64, BBox, BBox)> = bundle
        .associations
        .iter()
        .filter(|t| t.image_id == a.image_id)
        .map(|t| (t.id, t.shadow.bbox, t.object.bbox))
        .collect();
    if pairs.is_empty() {
        return Err(CliError::file(
            &a.pred,
            format!("image {} has no shadow-object pairs", a.image_id),
        ));
    }
    let result = image_light(a.image_id, pairs);
    let mut summary = String::new();
    for p in &result.pairs {
        match (&p.light, &p.error) {
            (Some(l), _) => summary.push_str(&format!("association {}: {:.1} deg\n", p.association_id, l.angle_deg)),
            (None, Some(e)) => summary.push_str(&format!("association {}: {e}\n", p.association_id)),
            (None, None) => {}
        }
    }
    match &result.aggregate {
        Some(agg) => summary.push_str(&format!(
            "image {}: light at {:.1} deg (circular std {:.1} deg over {} pairs)\n",
            a.image_id, agg.angle_deg, agg.circular_std_deg, agg.count
        )),
        None => summary.push_str(&format!("image {}: no aggregate direction\n", a.image_id)),
    }
    emit(&a.report, &result, &summary)?;
    match &result.aggregate_error {
        None => Ok(()),
        Some(e) => Err(CliError::file(&a.pred, format!("image {}: {e}", a.image_id))),
    }
}

fn association<'a>(ds: &'a Dataset, path: &Path, id: u64) -> CliResult<&'a AssociationRecord> {
    ds.association(id)
        .ok_or_else(|| CliError::file(path, format!("association {id} does not exist")))
}

fn decode(rle: &RleMask) -> BitMask {
    rle.decode().expect("validated at load")
}

fn save_mask(path: &Path, mask: &BitMask) -> CliResult {
    let img = image::RgbImage::from_fn(mask.width(), mask.height(), |x, y| {
        let v = if mask.get(y, x) { 255 } else { 0 };
        image::Rgb([v, v, v])
    });
    save_png(path, &img)
}

#[derive(Serialize)]
struct RemoveReport {
    association_id: u64,
    dilation: u32,
    mask_area: u64,
    mask: RleMask,
    bbox: BBox,
}

pub fn edit_remove(a: RemoveArgs) -> CliResult {
    let ds = load_manifest(&a.manifest)?;
    let assoc = association(&ds, &a.manifest, a.assoc)?;
    let (shadow, object) = ds.pair(assoc);
    let mask = removal_mask(&decode(&shadow.mask), &decode(&object.mask), a.dilate)
        .map_err(|e| CliError::file(&a.manifest, format!("association {}: {e}", a.assoc)))?;
    save_mask(&a.out_mask, &mask)?;

    if let Some(out) = &a.out_image {
        let img_rec = ds.image(assoc.image_id).expect("checked at load");
        let src = image_root(&a.images, &a.manifest).join(&img_rec.file_name);
        match &a.inpaint_cmd {
            Some(template) => run_inpaint(template, &src, &a.out_mask, out)?,
            None => {
                let img = load_rgb(&src)?;
                let filled = fill_nearest(&img, &mask).map_err(|e| CliError::file(&src, e))?;
                save_png(out, &filled)?;
            }
        }
    }

    let report = RemoveReport {
        association_id: a.assoc,
        dilation: a.dilate,
        mask_area: mask.area(),
        bbox: mask_to_box_or_zero(&mask),
        mask: RleMask::encode(&mask),
    };
    let summary = format!(
        "removal mask for association {}: {} pixels, written to {}\n",
        a.assoc,
        report.mask_area,
        a.out_mask.display()
    );
    emit(&a.report, &report, &summary)
}

fn run_inpaint(template: &str, image: &Path, mask: &Path, output: &Path) -> CliResult {
    let cmd = template
        .replace("{image}", &image.display().to_string())
        .replace("{mask}", &mask.display().to_string())
        .replace("{output}", &output.display().to_string());
    let status = Command::new("sh")
        .arg("-c")
        .arg(&cmd)
        .status()
        .map_err(|e| CliError::Data(format!("cannot run inpainting command {cmd:?}: {e}")))?;
    if !status.success() {
        return Err(CliError::Data(format!(
            "inpainting command {cmd:?} failed with {status}"
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct TransferReport {
    source_association: u64,
    destination_image: u64,
    destination_light_deg: f64,
    anchor: Point,
    placement: Placement,
    rotation_deg: f64,
    resampled: bool,
    shadow: RleMask,
    shadow_bbox: BBox,
    object: RleMask,
    object_bbox: BBox,
}

pub fn edit_transfer(a: TransferArgs) -> CliResult {
    let src_ds = load_manifest(&a.src)?;
    let assoc = association(&src_ds, &a.src, a.src_assoc)?;
    let (shadow, object) = src_ds.pair(assoc);
    let (shadow, object) = (decode(&shadow.mask), decode(&object.mask));
    let src_rec = src_ds.image(assoc.image_id).expect("checked at load");
    let src_img = load_rgb(&image_root(&a.src_images, &a.src).join(&src_rec.file_name))?;

    let dst_ds = load_manifest(&a.dst)?;
    let dst_rec = dst_ds
        .image(a.dst_image_id)
        .ok_or_else(|| CliError::file(&a.dst, format!("image {} does not exist", a.dst_image_id)))?;
    let dst_img = load_rgb(&image_root(&a.dst_images, &a.dst).join(&dst_rec.file_name))?;

    let dst_light = match a.dst_light_angle {
        Some(deg) => {
            let r = deg.to_radians();
            LightDirection::from_vector(Point::new(r.cos(), r.sin()))
                .ok_or_else(|| CliError::Usage(format!("--dst-light-angle {deg} is not finite")))?
        }
        None => {
            let pairs = dst_ds.associations_in(a.dst_image_id).map(|x| {
                let (s, o) = dst_ds.pair(x);
                (x.id, s.bbox, o.bbox)
            });
            let est = image_light(a.dst_image_id, pairs);
            let agg = est.aggregate.ok_or_else(|| {
                CliError::file(
                    &a.dst,
                    format!(
                        "image {} has no usable light estimate ({}); pass --dst-light-angle",
                        a.dst_image_id,
                        est.aggregate_error.unwrap_or_default()
                    ),
                )
            })?;
            LightDirection::from_vector(agg.direction).expect("unit vector")
        }
    };

    let placement = Placement {
        at: Point::new(a.at.0, a.at.1),
        scale: a.scale,
    };
    let src = TransferSource {
        image: &src_img,
        shadow: &shadow,
        object: &object,
    };
    let out = transfer_object(&src, &dst_img, &dst_light, &placement).map_err(|e| match e {
        soba_core::apps::EditError::Scale(_) => CliError::Usage(e.to_string()),
        e => CliError::file(&a.src, format!("association {}: {e}", a.src_assoc)),
    })?;
    save_png(&a.out_image, &out.image)?;
    let report = TransferReport {
        source_association: a.src_assoc,
        destination_image: a.dst_image_id,
        destination_light_deg: dst_light.angle_deg,
        anchor: out.anchor,
        placement,
        rotation_deg: out.rotation_deg,
        resampled: out.resampled,
        shadow_bbox: mask_to_box_or_zero(&out.shadow),
        shadow: RleMask::encode(&out.shadow),
        object_bbox: mask_to_box_or_zero(&out.object),
        object: RleMask::encode(&out.object),
    };
    let summary = format!(
        "transferred association {} into image {} (shadow rotated {:.1} deg), written to {}\n",
        a.src_assoc,
        a.dst_image_id,
        out.rotation_deg,
        a.out_image.display()
    );
    emit(&a.report, &report, &summary)
}
