//! Instance generators writing matrix files plus a manifest.

use crate::error::{CliError, CliResult};
use crate::matfile::{read_matrix, write_matrix};
use clap::ValueEnum;
use conesv_core::apps::{gen_biclique, gen_circulant, gen_schur_orthant, gen_schur_schur};
use conesv_core::cones::make_cone;
use conesv_core::instance::SVInstance;
use conesv_core::numerics::Mat;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenKind {
    SchurOrthant,
    SchurSchur,
    Biclique,
    Circulant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    /// Dimension for Schur kinds, order of the circulant, or graph columns.
    pub n: usize,
    /// Graph rows (biclique only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub density: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub planted: Option<(usize, usize)>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
}

impl GenParams {
    pub fn n(n: usize) -> Self {
        GenParams {
            n,
            m: None,
            density: None,
            planted: None,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Files {
    pub a: String,
    pub g: String,
    pub h: String,
    /// Biadjacency matrix of a biclique instance.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub b: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub lambda: f64,
    pub angle_pi: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub u: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub v: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rows: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cols: Option<Vec<usize>>,
}

impl Truth {
    fn value(lambda: f64) -> Self {
        Truth {
            lambda,
            angle_pi: lambda.clamp(-1.0, 1.0).acos() / PI,
            u: None,
            v: None,
            rows: None,
            cols: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: GenKind,
    pub params: GenParams,
    pub files: Files,
    pub truth: Option<Truth>,
}

impl Manifest {
    pub fn read(dir: &Path) -> CliResult<Manifest> {
        let path = dir.join(MANIFEST);
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Parse {
            path: path.display().to_string(),
            line: e.line(),
            msg: e.to_string(),
        })
    }

    /// Rebuild the instance from the matrix files next to the manifest.
    pub fn load(&self, dir: &Path) -> CliResult<SVInstance> {
        let a = read_matrix(&dir.join(&self.files.a))?;
        let g = read_matrix(&dir.join(&self.files.g))?;
        let h = read_matrix(&dir.join(&self.files.h))?;
        Ok(SVInstance::new(a, make_cone(&g)?, make_cone(&h)?)?)
    }
}

fn to_vec(x: &conesv_core::numerics::Vector) -> Vec<f64> {
    x.iter().copied().collect()
}

pub struct Generated {
    pub inst: SVInstance,
    pub truth: Option<Truth>,
    /// Biadjacency matrix for biclique instances.
    pub biadjacency: Option<Mat>,
}

pub fn build(kind: GenKind, params: &GenParams) -> CliResult<Generated> {
    let plain = |inst, truth| Generated {
        inst,
        truth,
        biadjacency: None,
    };
    Ok(match kind {
        GenKind::SchurOrthant => {
            let (inst, gt) = gen_schur_orthant(params.n)?;
            let truth = Truth {
                u: Some(to_vec(&gt.u)),
                v: Some(to_vec(&gt.v)),
                ..Truth::value(gt.lambda)
            };
            plain(inst, Some(truth))
        }
        GenKind::SchurSchur => {
            let (inst, lambda) = gen_schur_schur(params.n)?;
            plain(inst, Some(Truth::value(lambda)))
        }
        GenKind::Biclique => {
            let density = params.density.unwrap_or(0.0);
            let (k, l) = params.planted.unwrap_or((0, 0));
            let bi = gen_biclique(params.m.unwrap_or(params.n), params.n, density, k, l, params.seed.unwrap_or(0))?;
            // Without background edges the planted block is the unique
            // maximum biclique.
            let truth = (density == 0.0 && k * l > 0).then(|| Truth {
                rows: Some((0..bi.b.nrows()).filter(|&i| bi.b.row(i).sum() > 0.0).collect()),
                cols: Some((0..bi.b.ncols()).filter(|&j| bi.b.column(j).sum() > 0.0).collect()),
                ..Truth::value(-((k * l) as f64).sqrt())
            });
            Generated {
                inst: bi.sv_instance()?,
                truth,
                biadjacency: Some(bi.b),
            }
        }
        GenKind::Circulant => plain(gen_circulant(params.n)?.sv_instance()?, None),
    })
}

/// Write `A.txt`, `G.txt`, `H.txt` (and `B.txt` for bicliques) plus the
/// manifest into `dir`.
pub fn generate(kind: GenKind, params: &GenParams, dir: &Path) -> CliResult<Manifest> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let Generated {
        inst,
        truth,
        biadjacency,
    } = build(kind, params)?;
    let mut b_file = None;
    if let Some(b) = &biadjacency {
        write_matrix(&dir.join("B.txt"), b)?;
        b_file = Some("B.txt".to_string());
    }
    write_matrix(&dir.join("A.txt"), inst.a())?;
    write_matrix(&dir.join("G.txt"), inst.p().generators())?;
    write_matrix(&dir.join("H.txt"), inst.q().generators())?;
    let manifest = Manifest {
        kind,
        params: params.clone(),
        files: Files {
            a: "A.txt".into(),
            g: "G.txt".into(),
            h: "H.txt".into(),
            b: b_file,
        },
        truth,
    };
    let path = dir.join(MANIFEST);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, json + "\n").map_err(|e| CliError::io(&path, e))?;
    Ok(manifest)
}
