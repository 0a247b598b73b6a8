//! Versioned storage: series, segmentation lineage, purge.

use segstudio::dicom::{generate_phantom, PhantomSpec};
use segstudio::store::{PurgeScope, Store};

pub fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let store = Store::open(dir.path())?;
    let p = generate_phantom(&PhantomSpec::sphere(16, 5.0, 1000, "1.2.3.4"))?;
    let id = store.put_series(&p.series)?;

    let v1 = store.put_segmentation(&id, &p.ground_truth)?;
    let mut edit = store.get_segmentation(&id, v1)?.derive_edit();
    edit.edit_roi(1, &[])?;
    let v2 = store.put_segmentation(&id, &edit)?;
    for v in store.list_versions(&id)? {
        println!(
            "v{} parent {:?} {:?}",
            v.version, v.parent_version, v.provenance.source
        );
    }
    assert_eq!(store.latest_version(&id)?, Some(v2));

    // Reopening replays the index.
    drop(store);
    let store = Store::open(dir.path())?;
    println!(
        "after reopen: {} series, integrity ok {}",
        store.series_count(),
        store.verify().is_ok()
    );

    let receipt = store.purge_series(&id, PurgeScope::Everything)?;
    println!(
        "purged {} blobs; get now fails: {}",
        receipt.removed_blobs.len(),
        store.get_series(&id).unwrap_err()
    );
    Ok(())
}
