//! Surface energy `I_Ω(F)` of polyhedral sets and the search for `φ_Ω`
//! over half-space cuts.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::geometry::{
    format_rational, halfspace_clip, Domain, FacetClass, SurfaceOrigin, SurfaceSet, UnitVector,
};
use crate::nu::{direction_grid, NuTable};

/// `I_Ω(F)` with its three contributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyValue {
    pub value: f64,
    /// `∫_{∂F ∩ Ω} ν(v_F)`.
    pub interior: f64,
    /// `∫_{Γ² ∩ ∂(F ∩ Ω)} ν(v_F)`.
    pub sink: f64,
    /// `∫_{Γ¹ ∩ ∂(Ω ∖ F)} ν(v_Ω)`.
    pub source: f64,
    /// Propagated standard error of the table values.
    pub stderr: f64,
}

/// Sums `area · ν(normal)` over the classified pieces; neutral pieces carry
/// no energy.
pub fn energy(set: &SurfaceSet, table: &NuTable) -> Result<EnergyValue> {
    let (mut interior, mut sink, mut source, mut var) = (0.0, 0.0, 0.0, 0.0);
    for f in &set.facets {
        let slot = match f.class {
            FacetClass::Interior => &mut interior,
            FacetClass::Sink => &mut sink,
            FacetClass::Source => &mut source,
            FacetClass::Neutral => continue,
        };
        if f.area == 0.0 {
            continue;
        }
        let nu = table.lookup(&f.normal)?;
        *slot += f.area * nu.value;
        var += (f.area * nu.stderr).powi(2);
    }
    Ok(EnergyValue {
        value: interior + sink + source,
        interior,
        sink,
        source,
        stderr: var.sqrt(),
    })
}

/// Candidate family: `offsets` equally spaced interior offsets for each
/// direction, spanning the range of `x·v` over the bounding box of `Ω`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutFamily {
    pub directions: Vec<UnitVector>,
    pub offsets: usize,
}

impl CutFamily {
    pub fn grid(d: usize, offsets: usize) -> Self {
        CutFamily {
            directions: direction_grid(d),
            offsets,
        }
    }

    /// Offsets `c_k` used for direction `v` on `domain`.
    pub fn offsets_for(&self, domain: &Domain, v: &UnitVector) -> Vec<f64> {
        let (lo, hi) = domain.bounding_box();
        let (mut cmin, mut cmax) = (0.0, 0.0);
        for (k, &vk) in v.as_slice().iter().enumerate() {
            let a = crate::geometry::to_f64(&lo[k]) * vk;
            let b = crate::geometry::to_f64(&hi[k]) * vk;
            cmin += a.min(b);
            cmax += a.max(b);
        }
        let m = self.offsets as f64 + 1.0;
        (1..=self.offsets)
            .map(|k| cmin + (k as f64 / m) * (cmax - cmin))
            .collect()
    }
}

/// One evaluated candidate.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Candidate {
    Empty,
    Full,
    Cut { v: Vec<f64>, c: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub candidate: Candidate,
    pub energy: EnergyValue,
}

/// Result of the family search. `phi_omega_hat` is an upper bound for
/// `φ_Ω`, the infimum over all subsets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiOmegaResult {
    pub phi_omega_hat: f64,
    pub stderr: f64,
    pub argmin: Candidate,
    pub trace: Vec<TraceEntry>,
}

/// Minimizes the energy over `∅`, `Ω` and the half-space cuts of `family`.
/// Ties keep the earliest candidate in the order `∅`, `Ω`, then the cuts.
pub fn phi_omega_search(
    domain: &Domain,
    table: &NuTable,
    family: &CutFamily,
) -> Result<PhiOmegaResult> {
    let mut jobs = vec![Candidate::Empty, Candidate::Full];
    for v in &family.directions {
        for c in family.offsets_for(domain, v) {
            jobs.push(Candidate::Cut {
                v: v.as_slice().to_vec(),
                c,
            });
        }
    }
    let trace = jobs
        .into_par_iter()
        .map(|candidate| {
            let set = match &candidate {
                Candidate::Empty => SurfaceSet::empty(domain),
                Candidate::Full => SurfaceSet::full(domain),
                Candidate::Cut { v, c } => halfspace_clip(domain, &UnitVector::new(v.clone())?, *c),
            };
            Ok(TraceEntry {
                energy: energy(&set, table)?,
                candidate,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = trace.iter().fold(&trace[0], |b, t| {
        if t.energy.value < b.energy.value {
            t
        } else {
            b
        }
    });
    Ok(PhiOmegaResult {
        phi_omega_hat: best.energy.value,
        stderr: best.energy.stderr,
        argmin: best.candidate.clone(),
        trace,
    })
}

/// Results JSON `{phi_omega_hat, argmin, family, nu_table_ref}`.
pub fn results_json(result: &PhiOmegaResult, family: &CutFamily, nu_table_ref: &str) -> String {
    let directions: Vec<&[f64]> = family.directions.iter().map(|v| v.as_slice()).collect();
    serde_json::to_string_pretty(&serde_json::json!({
        "schema": "percoflow/1",
        "phi_omega_hat": result.phi_omega_hat,
        "stderr": result.stderr,
        "argmin": result.argmin,
        "family": {"directions": directions, "offsets": family.offsets},
        "nu_table_ref": nu_table_ref,
    }))
    .expect("serializable")
}

/// Human-readable description of the set an origin describes.
pub fn describe(origin: &SurfaceOrigin) -> String {
    match origin {
        SurfaceOrigin::Empty => "empty".into(),
        SurfaceOrigin::Full => "full".into(),
        SurfaceOrigin::HalfSpace { normal, offset } => {
            format!("x.{normal:?} <= {offset}")
        }
    }
}

/// Exact Lebesgue measures `(ℒᵈ(F), ℒᵈ(Ω ∖ F))` as `p/q` strings.
pub fn exact_volumes(set: &SurfaceSet) -> (String, String) {
    (
        format_rational(&set.volume),
        format_rational(&set.complement_volume),
    )
}
