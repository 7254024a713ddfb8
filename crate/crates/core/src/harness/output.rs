use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::sweep::RunRecord;
use crate::error::{Error, Result};
use crate::spectral::{spacing_histogram, Surmise, HIST_BIN_WIDTH};

/// Kinds of files a record can be written as.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Artifact {
    /// `s_bin_center, density_empirical, density_GOE2, density_GUE` per point.
    SpacingHist,
    /// `eps, value, stderr, realizations` per qubit count.
    EtaCurve,
    /// `n_q, eps_chi, stderr, model_value`.
    BorderTable,
    /// `theta, p, density`.
    HusimiGrid,
    /// `eps, lambda_1 .. lambda_N` per qubit count, first realization.
    LevelsVsEps,
    /// Little-endian f64 quasi-energies with a JSON sidecar per point.
    RawSpectra,
}

impl Artifact {
    pub const ALL: [Artifact; 6] = [
        Artifact::SpacingHist,
        Artifact::EtaCurve,
        Artifact::BorderTable,
        Artifact::HusimiGrid,
        Artifact::LevelsVsEps,
        Artifact::RawSpectra,
    ];

    /// Artifacts that `record` has data for.
    pub fn available(record: &RunRecord) -> Vec<Artifact> {
        Self::ALL
            .into_iter()
            .filter(|a| match a {
                Artifact::SpacingHist | Artifact::EtaCurve | Artifact::LevelsVsEps => {
                    !record.points.is_empty()
                }
                Artifact::RawSpectra => record.config.dump_spectra && !record.points.is_empty(),
                Artifact::BorderTable => record.border.is_some(),
                Artifact::HusimiGrid => record.husimi.is_some(),
            })
            .collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub artifact: Artifact,
    pub path: PathBuf,
}

#[derive(Serialize)]
struct Manifest<'a> {
    config_hash: &'a str,
    software_version: &'a str,
    rng: &'a str,
    files: &'a [ManifestEntry],
    record: &'a RunRecord,
}

pub const MANIFEST: &str = "manifest.json";

fn write(dir: &Path, name: &str, body: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn eps_tag(eps: f64) -> String {
    format!("{eps:e}").replace('-', "m").replace('.', "p")
}

/// Writes the requested artifacts into `dir` plus a manifest linking them to
/// the record. Returns the written paths, manifest last.
pub fn emit_outputs(record: &RunRecord, what: &[Artifact], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let available = Artifact::available(record);
    if let Some(missing) = what.iter().find(|a| !available.contains(a)) {
        return Err(Error::NotFound(format!(
            "{missing:?} is not present in the run record"
        )));
    }
    let mut entries = Vec::new();
    let mut qubits: Vec<usize> = record.points.iter().map(|p| p.n_q).collect();
    qubits.dedup();

    for &artifact in what {
        match artifact {
            Artifact::SpacingHist => {
                for p in &record.points {
                    let s = p.pooled_spacings();
                    let hist = spacing_histogram(&s);
                    let mut body =
                        String::from("s_bin_center,density_empirical,density_GOE2,density_GUE\n");
                    for (b, d) in hist.iter().enumerate() {
                        let c = (b as f64 + 0.5) * HIST_BIN_WIDTH;
                        let _ = writeln!(
                            body,
                            "{c},{d},{},{}",
                            Surmise::Goe2.density(c)?,
                            Surmise::Gue.density(c)?
                        );
                    }
                    let name = format!("spacing_hist_nq{}_eps{}.csv", p.n_q, eps_tag(p.eps));
                    entries.push(ManifestEntry {
                        artifact,
                        path: write(dir, &name, &body)?,
                    });
                }
            }
            Artifact::EtaCurve => {
                let stat = record.config.statistic;
                for &n_q in &qubits {
                    let mut body = String::from("eps,value,stderr,realizations\n");
                    for p in record.points_for(n_q) {
                        let (v, se) = match p.get(stat) {
                            Some(e) => (e.value, e.stderr.unwrap_or(f64::NAN)),
                            None => (f64::NAN, f64::NAN),
                        };
                        let _ = writeln!(body, "{},{v},{se},{}", p.eps, p.realizations);
                    }
                    let name = format!("{}_curve_nq{n_q}.csv", stat.name());
                    entries.push(ManifestEntry {
                        artifact,
                        path: write(dir, &name, &body)?,
                    });
                }
            }
            Artifact::BorderTable => {
                let border = record.border.as_ref().expect("checked available");
                let mut body = String::from("n_q,eps_chi,stderr,model_value\n");
                for r in &border.rows {
                    let _ = writeln!(
                        body,
                        "{},{},{},{}",
                        r.n_q,
                        r.eps_chi,
                        r.stderr.unwrap_or(f64::NAN),
                        r.model_value
                    );
                }
                entries.push(ManifestEntry {
                    artifact,
                    path: write(dir, "border_table.csv", &body)?,
                });
            }
            Artifact::HusimiGrid => {
                let g = record.husimi.as_ref().expect("checked available");
                let mut body = String::from("theta,p,density\n");
                for (i, t) in g.thetas.iter().enumerate() {
                    for (j, p) in g.momenta.iter().enumerate() {
                        let _ = writeln!(body, "{t},{p},{}", g.at(i, j));
                    }
                }
                entries.push(ManifestEntry {
                    artifact,
                    path: write(dir, "husimi.csv", &body)?,
                });
            }
            Artifact::LevelsVsEps => {
                for &n_q in &qubits {
                    let dim = 1usize << n_q;
                    let mut body = String::from("eps");
                    for k in 1..=dim {
                        let _ = write!(body, ",lambda_{k}");
                    }
                    body.push('\n');
                    for p in record.points_for(n_q) {
                        let _ = write!(body, "{}", p.eps);
                        for l in p.levels.first().map(Vec::as_slice).unwrap_or_default() {
                            let _ = write!(body, ",{l}");
                        }
                        body.push('\n');
                    }
                    entries.push(ManifestEntry {
                        artifact,
                        path: write(dir, &format!("levels_nq{n_q}.csv"), &body)?,
                    });
                }
            }
            Artifact::RawSpectra => {
                for p in &record.points {
                    let stem = format!("spectra_nq{}_eps{}", p.n_q, eps_tag(p.eps));
                    let bytes: Vec<u8> = p
                        .levels
                        .iter()
                        .flatten()
                        .flat_map(|x| x.to_le_bytes())
                        .collect();
                    let bin = dir.join(format!("{stem}.f64"));
                    std::fs::write(&bin, bytes).map_err(|e| Error::io(&bin, e))?;
                    let sidecar = serde_json::json!({
                        "dtype": "f64-le",
                        "shape": [p.levels.len(), 1usize << p.n_q],
                        "n_q": p.n_q,
                        "eps": p.eps,
                        "rho": p.rho,
                        "config_hash": record.config_hash,
                        "spectra_checksum": p.spectra_checksum,
                    });
                    write(
                        dir,
                        &format!("{stem}.json"),
                        &serde_json::to_string_pretty(&sidecar)?,
                    )?;
                    entries.push(ManifestEntry {
                        artifact,
                        path: bin,
                    });
                }
            }
        }
    }

    let manifest = Manifest {
        config_hash: &record.config_hash,
        software_version: &record.software_version,
        rng: &record.rng,
        files: &entries,
        record,
    };
    let manifest_path = write(dir, MANIFEST, &serde_json::to_string_pretty(&manifest)?)?;
    let mut paths: Vec<PathBuf> = entries.into_iter().map(|e| e.path).collect();
    paths.push(manifest_path);
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{EpsGrid, ExperimentConfig};
    use crate::harness::sweep::run_sweep;

    #[test]
    fn schemas_and_missing_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::new(2f64.sqrt(), vec![4]);
        cfg.eps_grid = EpsGrid::Values(vec![1e-3, 1e-2]);
        cfg.realizations = Some(8);
        cfg.dump_spectra = true;
        let rec = run_sweep(&cfg).unwrap();
        assert!(matches!(
            emit_outputs(&rec, &[Artifact::BorderTable], dir.path()),
            Err(Error::NotFound(_))
        ));
        let paths = emit_outputs(
            &rec,
            &[
                Artifact::SpacingHist,
                Artifact::EtaCurve,
                Artifact::LevelsVsEps,
                Artifact::RawSpectra,
            ],
            dir.path(),
        )
        .unwrap();
        let read = |name: &str| std::fs::read_to_string(dir.path().join(name)).unwrap();
        let hist = read("spacing_hist_nq4_eps1e-3.csv".replace('-', "m").as_str());
        assert!(hist.starts_with("s_bin_center,density_empirical,density_GOE2,density_GUE\n"));
        assert_eq!(hist.lines().count(), 51);
        let curve = read("eta_curve_nq4.csv");
        assert!(curve.starts_with("eps,value,stderr,realizations\n"));
        assert_eq!(curve.lines().count(), 3);
        let levels = read("levels_nq4.csv");
        let header = levels.lines().next().unwrap();
        assert_eq!(header.split(',').count(), 17);
        assert!(header.starts_with("eps,lambda_1,"));
        let raw = std::fs::read(dir.path().join("spectra_nq4_eps1em2.f64")).unwrap();
        assert_eq!(raw.len(), 8 * 16 * 8);
        let manifest: serde_json::Value = serde_json::from_str(&read(MANIFEST)).unwrap();
        assert_eq!(manifest["config_hash"], rec.config_hash);
        assert_eq!(manifest["files"].as_array().unwrap().len(), paths.len() - 1);
    }
}
