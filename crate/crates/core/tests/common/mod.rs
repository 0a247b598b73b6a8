//! Shared fixtures and independent oracles for the integration tests.
//!
//! The oracles here deliberately avoid the library's kernels: they work on
//! plain `Vec<bool>` and re-derive geometry from first principles.

#![allow(dead_code)]

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use segstudio::geometry::{Orientation, Spacing};
use segstudio::{VolumeGrid, VoxelIndex, VoxelMask, WorldPoint};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_dims(rng: &mut impl Rng, max: usize) -> [usize; 3] {
    [
        rng.random_range(1..=max),
        rng.random_range(1..=max),
        rng.random_range(1..=max),
    ]
}

pub fn random_grid(rng: &mut impl Rng, max: usize) -> VolumeGrid {
    let d = random_dims(rng, max);
    VolumeGrid::axial(
        d,
        Spacing::new(
            rng.random_range(0.3..3.0),
            rng.random_range(0.3..3.0),
            rng.random_range(0.5..5.0),
        ),
        WorldPoint::new(
            rng.random_range(-200.0..200.0),
            rng.random_range(-200.0..200.0),
            rng.random_range(-200.0..200.0),
        ),
    )
    .unwrap()
}

/// Random bits with a random density, so sparse and dense masks both occur.
pub fn random_bits(rng: &mut impl Rng, n: usize) -> Vec<bool> {
    let p: f64 = match rng.random_range(0..5) {
        0 => 0.0,
        1 => 1.0,
        _ => rng.random_range(0.0..1.0),
    };
    (0..n).map(|_| rng.random_bool(p)).collect()
}

pub fn random_mask(rng: &mut impl Rng, grid: &VolumeGrid) -> VoxelMask {
    let bits = random_bits(rng, grid.voxel_count());
    VoxelMask::from_bits(grid.clone(), &bits).unwrap()
}

/// Uniformly random rotation (from a random unit quaternion).
pub fn random_orientation(rng: &mut impl Rng) -> Orientation {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(0.1..=1.0).contains(&n) {
            continue;
        }
        let [w, x, y, z] = q.map(|v| v / n);
        let row = [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y + w * z),
            2.0 * (x * z - w * y),
        ];
        let col = [
            2.0 * (x * y - w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z + w * x),
        ];
        return Orientation { row, col };
    }
}

pub fn brute_counts(a: &[bool], b: &[bool]) -> (usize, usize, usize) {
    let mut ca = 0;
    let mut cb = 0;
    let mut both = 0;
    for (x, y) in a.iter().zip(b) {
        if *x {
            ca += 1;
        }
        if *y {
            cb += 1;
        }
        if *x && *y {
            both += 1;
        }
    }
    (ca, cb, both)
}

pub fn brute_dice(a: &[bool], b: &[bool]) -> f64 {
    let (ca, cb, both) = brute_counts(a, b);
    if ca + cb == 0 {
        1.0
    } else {
        2.0 * both as f64 / (ca + cb) as f64
    }
}

/// Even-odd ray casting along +x (the textbook crossing test).
pub fn point_in_polygon(poly: &[(f64, f64)], x: f64, y: f64) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = poly[i];
        let (xj, yj) = poly[j];
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

pub fn distance_to_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}

pub fn distance_to_boundary(poly: &[(f64, f64)], p: (f64, f64)) -> f64 {
    (0..poly.len())
        .map(|i| distance_to_segment(p, poly[i], poly[(i + 1) % poly.len()]))
        .fold(f64::INFINITY, f64::min)
}

/// Random simple (star-shaped) polygon inside `[lo, hi]²`.
pub fn random_simple_polygon(rng: &mut impl Rng, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let n = rng.random_range(3..=16);
    let cx = rng.random_range(lo + 0.3 * (hi - lo)..hi - 0.3 * (hi - lo));
    let cy = rng.random_range(lo + 0.3 * (hi - lo)..hi - 0.3 * (hi - lo));
    let rmax = (cx - lo).min(hi - cx).min(cy - lo).min(hi - cy);
    let mut angles: Vec<f64> = (0..n)
        .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
        .collect();
    angles.sort_by(f64::total_cmp);
    angles.dedup();
    let mut poly: Vec<(f64, f64)> = angles
        .into_iter()
        .map(|a| {
            let r = rng.random_range(0.15 * rmax..rmax);
            (cx + r * a.cos(), cy + r * a.sin())
        })
        .collect();
    if poly.len() < 3 {
        poly = vec![(cx - 1.0, cy - 1.0), (cx + 1.0, cy - 1.0), (cx, cy + 1.0)];
    }
    poly
}

/// All voxels whose centre is within `radius` mm of `center`, by plain
/// enumeration.
pub fn ball_oracle(grid: &VolumeGrid, center: WorldPoint, radius: f64) -> Vec<bool> {
    let mut out = vec![false; grid.voxel_count()];
    for k in 0..grid.slices() {
        for j in 0..grid.rows() {
            for i in 0..grid.cols() {
                let p = grid.voxel_to_world(VoxelIndex::new(i, j, k)).unwrap();
                let d = ((p.x - center.x).powi(2)
                    + (p.y - center.y).powi(2)
                    + (p.z - center.z).powi(2))
                .sqrt();
                out[grid.linear_index(VoxelIndex::new(i, j, k))] = d <= radius;
            }
        }
    }
    out
}

pub fn time<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed())
}

pub mod http {
    use std::time::{Duration, Instant};

    use reqwest::blocking::{multipart, Client};
    use segstudio::dicom::Phantom;
    use segstudio::orchestrator::{InferenceJob, JobState};

    pub fn client() -> Client {
        Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .unwrap()
    }

    pub fn upload_phantom(
        client: &Client,
        base: &str,
        phantom: &Phantom,
    ) -> reqwest::blocking::Response {
        let mut form = multipart::Form::new();
        for (k, f) in phantom.files.iter().enumerate() {
            form = form.part(
                format!("file{k}"),
                multipart::Part::bytes(f.clone())
                    .file_name(Phantom::file_name(k))
                    .mime_str("application/dicom")
                    .unwrap(),
            );
        }
        client
            .post(format!("{base}/studies"))
            .multipart(form)
            .send()
            .unwrap()
    }

    pub fn wait_for_job(
        client: &Client,
        base: &str,
        job_id: &str,
        timeout: Duration,
    ) -> InferenceJob {
        let deadline = Instant::now() + timeout;
        loop {
            let job: InferenceJob = client
                .get(format!("{base}/jobs/{job_id}"))
                .send()
                .unwrap()
                .json()
                .unwrap();
            if job.state == JobState::Completed
                || job.state == JobState::Failed
                || Instant::now() > deadline
            {
                return job;
            }
            std::thread::sleep(Duration::from_millis(20));
        }
    }
}
