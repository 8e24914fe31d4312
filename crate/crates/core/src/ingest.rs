//! Reads one trial directory:
//!
//! ```text
//! meta.json        TrialMeta
//! page.html        saved SERP markup
//! screenshot.png   full-page screenshot (gray or RGB)
//! ads.csv          etype,x,y,w,h
//! fixations.csv    x,y,start,end
//! clicks.csv       t,x,y,is_final
//! cursor.csv       t,x,y,kind
//! ```
//!
//! CSV files are optional; a missing one reads as empty.

use std::fs;
use std::path::Path;

use image::DynamicImage;
use serde::de::DeserializeOwned;

use crate::error::{Error, Result};
use crate::model::{AdRect, ClickEvent, CursorEvent, FixationEvent, Raster, TrialBundle, TrialMeta};

pub const META_FILE: &str = "meta.json";
pub const HTML_FILE: &str = "page.html";
pub const SCREENSHOT_FILE: &str = "screenshot.png";
pub const ADS_FILE: &str = "ads.csv";
pub const FIXATIONS_FILE: &str = "fixations.csv";
pub const CLICKS_FILE: &str = "clicks.csv";
pub const CURSOR_FILE: &str = "cursor.csv";

fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    rdr.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| Error::Ingest { path: path.to_path_buf(), message: e.to_string() })
}

pub fn load_raster(path: &Path) -> Result<Raster> {
    let img = image::open(path).map_err(|e| Error::Ingest { path: path.to_path_buf(), message: e.to_string() })?;
    Ok(match img {
        DynamicImage::ImageLuma8(g) => {
            let (w, h) = g.dimensions();
            Raster::from_luma(w, h, g.into_raw())
        }
        other => {
            let rgb = other.to_rgb8();
            let (w, h) = rgb.dimensions();
            Raster::from_rgb(w, h, rgb.as_raw())
        }
    })
}

pub fn save_raster(raster: &Raster, path: &Path) -> Result<()> {
    let img = image::GrayImage::from_raw(raster.width(), raster.height(), raster.pixels().to_vec())
        .expect("raster buffer matches its dimensions");
    img.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

pub fn read_trial_dir(dir: &Path) -> Result<TrialBundle> {
    let meta_path = dir.join(META_FILE);
    if !meta_path.exists() {
        return Err(Error::MissingMeta(dir.to_path_buf()));
    }
    let meta_text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: TrialMeta = serde_json::from_str(&meta_text)
        .map_err(|e| Error::Ingest { path: meta_path.clone(), message: e.to_string() })?;

    let html_path = dir.join(HTML_FILE);
    let html_bytes = fs::read(&html_path).map_err(|e| Error::io(&html_path, e))?;
    let html = String::from_utf8_lossy(&html_bytes).into_owned();

    let screenshot = load_raster(&dir.join(SCREENSHOT_FILE))?;

    Ok(TrialBundle {
        meta,
        screenshot,
        html,
        ad_rects: read_csv::<AdRect>(&dir.join(ADS_FILE))?,
        fixations: read_csv::<FixationEvent>(&dir.join(FIXATIONS_FILE))?,
        clicks: read_csv::<ClickEvent>(&dir.join(CLICKS_FILE))?,
        cursor: read_csv::<CursorEvent>(&dir.join(CURSOR_FILE))?,
    })
}

fn write_csv<T: serde::Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .has_headers(false)
        .from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Writes a bundle in the directory layout read by [`read_trial_dir`].
pub fn write_trial_dir(bundle: &TrialBundle, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = serde_json::to_string_pretty(&bundle.meta)?;
    fs::write(dir.join(META_FILE), meta + "\n").map_err(|e| Error::io(dir.join(META_FILE), e))?;
    fs::write(dir.join(HTML_FILE), &bundle.html).map_err(|e| Error::io(dir.join(HTML_FILE), e))?;
    save_raster(&bundle.screenshot, &dir.join(SCREENSHOT_FILE))?;
    write_csv(&dir.join(ADS_FILE), &bundle.ad_rects, &["etype", "x", "y", "w", "h"])?;
    write_csv(&dir.join(FIXATIONS_FILE), &bundle.fixations, &["x", "y", "start", "end"])?;
    write_csv(&dir.join(CLICKS_FILE), &bundle.clicks, &["t", "x", "y", "is_final"])?;
    write_csv(&dir.join(CURSOR_FILE), &bundle.cursor, &["t", "x", "y", "kind"])?;
    Ok(())
}
