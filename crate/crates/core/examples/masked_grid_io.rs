//! Round trip through the gridded file format: write snapshots and a mask,
//! load them back, place sensors and draw them on the grid.
//!
//! ```text
//! cargo run --release --example masked_grid_io
//! ```

use sparse_sensing::datasets::{
    gen_smooth_grid_dataset, inverse_sqrt_spectrum, load_masked_grid, rect_hole_mask, scatter_to_grid,
    write_masked_grid, SmoothGridConfig,
};
use sparse_sensing::selectors::{exclude_low_rms, select_bdg_fast, DEFAULT_EXCLUSION_FACTOR};
use sparse_sensing::{compute_pod, NoiseModel, TruncationConfig};

fn main() -> sparse_sensing::Result<()> {
    let (width, height, m) = (48, 20, 60);
    let cfg = SmoothGridConfig {
        width,
        height,
        mask: rect_hole_mask(width, height, 14, 5, 12, 8),
        m,
        spectrum: inverse_sqrt_spectrum(m),
        seed: 11,
    };
    let (x, grid) = gen_smooth_grid_dataset(&cfg)?;

    let dir = std::env::temp_dir().join("sparse-sensing-grid");
    std::fs::create_dir_all(&dir).map_err(|e| sparse_sensing::SensingError::Io {
        path: dir.clone(),
        source: e,
    })?;
    let (values, mask) = (dir.join("values.csv"), dir.join("mask.csv"));
    write_masked_grid(&values, &mask, &grid, &x)?;
    let (loaded, loaded_grid) = load_masked_grid(&values, &mask)?;
    println!(
        "{} active cells, {} snapshots, identical after reload: {}",
        loaded.n(),
        loaded.m(),
        loaded == x
    );

    let basis = compute_pod(&loaded)?;
    let noise = NoiseModel::build(&basis, TruncationConfig::full_tail(6, basis.q())?)?;
    let candidates = exclude_low_rms(&loaded, DEFAULT_EXCLUSION_FACTOR, 12)?;
    let state = select_bdg_fast(&basis, &noise, 12, &candidates)?;

    let mut marks = nalgebra::DVector::zeros(loaded_grid.n());
    for (k, &i) in state.indices.iter().enumerate() {
        marks[i] = (k + 1) as f64;
    }
    // '#' inactive, '.' active, letters are sensors in selection order.
    for row in scatter_to_grid(&loaded_grid, &marks)?.chunks(width) {
        let line: String = row
            .iter()
            .map(|&v| match v {
                v if v.is_nan() => '#',
                0.0 => '.',
                v => (b'a' + v as u8 - 1) as char,
            })
            .collect();
        println!("{line}");
    }
    Ok(())
}
