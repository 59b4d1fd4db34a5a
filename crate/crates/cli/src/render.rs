//! Stage-image output for `clean --render-dir`.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};

use wpc_core::pipeline::PipelineArtifacts;
use wpc_core::raster::{write_image, BinaryImage, ImageFormat};
use wpc_core::scada::{Dataset, Label};

use crate::{io_error, CliError};

const WHITE: Rgb<u8> = Rgb([255, 255, 255]);
const GRAY: Rgb<u8> = Rgb([176, 176, 176]);
const RED: Rgb<u8> = Rgb([214, 39, 40]);
const ORANGE: Rgb<u8> = Rgb([255, 127, 14]);
const BLUE: Rgb<u8> = Rgb([31, 119, 180]);

fn extension(format: ImageFormat) -> &'static str {
    match format {
        ImageFormat::Pgm => "pgm",
        ImageFormat::Png => "png",
    }
}

fn write_stage(
    dir: &Path,
    name: &str,
    img: &BinaryImage,
    format: ImageFormat,
) -> Result<PathBuf, CliError> {
    let path = dir.join(format!("{name}.{}", extension(format)));
    let file = File::create(&path).map_err(|e| io_error(&path, e))?;
    write_image(img, BufWriter::new(file), format).map_err(|e| io_error(&path, e))?;
    Ok(path)
}

/// Color overlay of final labels: normal gray, type1 red, type2 orange,
/// type3 blue, drawn in that order so abnormal points stay visible where
/// stamps overlap.
fn label_overlay(dataset: &Dataset, artifacts: &PipelineArtifacts) -> RgbImage {
    let t = &artifacts.transform;
    let mut img = RgbImage::from_pixel(t.width as u32, t.height as u32, WHITE);
    let mut paint = |want: Label, color: Rgb<u8>| {
        for point in dataset.points.iter().filter(|p| p.label == want) {
            let anchor = t.map_point(point.wind_speed, point.power);
            for dy in 0..t.stamp {
                for dx in 0..t.stamp {
                    let (x, y) = (anchor.x + dx, anchor.y + dy);
                    if x < t.width && y < t.height {
                        img.put_pixel(x as u32, y as u32, color);
                    }
                }
            }
        }
    };
    paint(Label::Normal, GRAY);
    paint(Label::Type1, RED);
    paint(Label::Type2, ORANGE);
    paint(Label::Type3, BLUE);
    img
}

/// Writes every pipeline stage into `dir`: the raw raster, the reference,
/// each opening from the sweep, the edge and normal regions, and the label
/// overlay.
pub fn render_stages(
    dir: &Path,
    dataset: &Dataset,
    artifacts: &PipelineArtifacts,
    format: ImageFormat,
) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    write_stage(dir, "raw", &artifacts.raw_image, format)?;
    write_stage(dir, "reference", &artifacts.reference_image, format)?;
    for entry in &artifacts.sweep.entries {
        write_stage(dir, &format!("opened_n{}", entry.n), &entry.opened, format)?;
    }
    write_stage(dir, "edge_region", artifacts.edge_mask.image(), format)?;
    write_stage(dir, "normal_region", artifacts.normal_mask.image(), format)?;

    let overlay = label_overlay(dataset, artifacts);
    let path = dir.join("labels.png");
    overlay.save(&path).map_err(|e| io_error(&path, e))?;
    Ok(())
}
