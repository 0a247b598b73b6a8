//! Running the reference threshold model through the orchestrator.

use std::sync::Arc;
use std::time::Duration;

use segstudio::analysis::dice;
use segstudio::dicom::{generate_phantom, PhantomSpec};
use segstudio::orchestrator::{
    Executor, LocalExecutor, ModelManifest, Orchestrator, OrchestratorConfig,
};
use segstudio::store::Store;

pub fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let store = Store::open(dir.path().join("data"))?;
    let p = generate_phantom(&PhantomSpec::sphere(32, 8.0, 1000, "1.2.3.5"))?;
    let id = store.put_series(&p.series)?;

    let ex: Arc<dyn Executor> = Arc::new(LocalExecutor::new("local-0", dir.path().join("ws")));
    let orch = Orchestrator::start(store.clone(), vec![ex], OrchestratorConfig::default())?;
    let model = orch.register_model(ModelManifest::threshold(
        "threshold",
        "1.0",
        "sphere",
        500.0,
    ))?;
    let job = orch.submit_job(&model.model_id, &id, None)?;
    let job = orch.wait_for(&job.job_id, Duration::from_secs(30))?;
    for t in &job.history {
        println!("{:?} at {}", t.state, t.at);
    }
    let v = job.version().ok_or("job produced no version")?;
    let pred = store.get_segmentation(&id, v)?;
    let d = dice(&pred.rois()[0].mask, &p.ground_truth.rois()[0].mask)?;
    println!("prediction v{v}: dice vs ground truth {}", d.value);
    for e in orch.executors() {
        println!("executor {} is {:?}", e.executor_id, e.state);
    }
    orch.shutdown();
    Ok(())
}
