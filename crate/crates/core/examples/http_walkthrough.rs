//! The whole workflow over HTTP: upload, predict, refine, evaluate, export,
//! delete.

use std::time::Duration;

use reqwest::blocking::{multipart, Client};
use segstudio::api::{ApiConfig, App, ServerHandle};
use segstudio::dicom::{generate_phantom, Phantom, PhantomSpec};
use segstudio::orchestrator::ModelManifest;
use serde_json::{json, Value};

pub fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let server = ServerHandle::spawn(App::from_config(&ApiConfig::new(dir.path()))?, 0)?;
    let base = server.url();
    let http = Client::builder().timeout(Duration::from_secs(30)).build()?;
    println!("listening on {base}");

    let p = generate_phantom(&PhantomSpec::sphere(32, 8.0, 1000, "1.2.3.7"))?;
    let mut form = multipart::Form::new();
    for (k, f) in p.files.iter().enumerate() {
        form = form.part(
            format!("f{k}"),
            multipart::Part::bytes(f.clone()).file_name(Phantom::file_name(k)),
        );
    }
    let series: Value = http
        .post(format!("{base}/studies"))
        .multipart(form)
        .send()?
        .json()?;
    let id = series["series_id"].as_str().unwrap().to_string();
    println!("uploaded series {id}");

    let model: Value = http
        .post(format!("{base}/models"))
        .json(&ModelManifest::threshold(
            "threshold",
            "1.0",
            "sphere",
            500.0,
        ))
        .send()?
        .json()?;
    let mut job: Value = http
        .post(format!("{base}/jobs"))
        .json(&json!({"model_id": model["model_id"], "series_id": id}))
        .send()?
        .json()?;
    while !matches!(job["state"].as_str(), Some("Completed" | "Failed")) {
        std::thread::sleep(Duration::from_millis(50));
        job = http
            .get(format!("{base}/jobs/{}", job["job_id"].as_str().unwrap()))
            .send()?
            .json()?;
    }
    let pred = job["result"]["version"].as_u64().ok_or("job failed")?;
    println!("prediction is version {pred}");

    let edit: Value = http
        .post(format!("{base}/series/{id}/segmentations/{pred}/edits"))
        .json(&json!({"roi_number": 1, "strokes": [
            {"center": [15.5, 15.5, 15.5], "radius": 3.0, "shape": "sphere", "mode": "erase"}
        ]}))
        .send()?
        .json()?;
    let corrected = edit["version"].as_u64().unwrap();
    println!(
        "edit -> version {corrected}, {} voxels",
        edit["voxel_count"]
    );

    let eval: Value = http
        .post(format!("{base}/evaluate"))
        .json(&json!({"series_id": id, "pred_version": corrected, "gt_version": pred}))
        .send()?
        .json()?;
    println!(
        "dice of edit vs prediction: {}",
        eval["report"]["mean_dice"]
    );

    let bundle = http
        .post(format!("{base}/export"))
        .json(&json!({"series_id": id, "pred_version": pred, "corrected_version": corrected}))
        .send()?
        .bytes()?;
    println!("bundle: {} bytes", bundle.len());

    let receipt: Value = http.delete(format!("{base}/series/{id}")).send()?.json()?;
    println!(
        "deleted {} blobs",
        receipt["removed_blobs"].as_array().map_or(0, Vec::len)
    );
    println!(
        "GET after delete: {}",
        http.get(format!("{base}/series/{id}")).send()?.status()
    );
    server.shutdown()?;
    Ok(())
}
