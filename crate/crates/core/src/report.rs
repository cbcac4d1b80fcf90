//! CSV layouts for trajectories, potential landscapes and fraction tables.
//!
//! Players, stations and profile indices are written one-based.

use std::io::Write;

use crate::error::Result;
use crate::limits::{EmpiricalFractions, NonAtomicEquilibrium};
use crate::selection::{NeReport, OrientedGraph, ProfileIndex, SelectionTrajectory};
use crate::sharing::SharingTrajectory;

/// `walk,step,player,profile_index,potential,changed`; step 0 is the start.
pub fn write_selection_trajectories<W: Write>(out: W, walks: &[SelectionTrajectory]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "walk",
        "step",
        "player",
        "profile_index",
        "potential",
        "changed",
    ])?;
    let idx = |i: Option<ProfileIndex>| i.map(|i| i.one_based().to_string()).unwrap_or_default();
    for (walk, t) in walks.iter().enumerate() {
        let walk = (walk + 1).to_string();
        w.write_record([
            walk.as_str(),
            "0",
            "",
            &idx(t.start_index),
            &t.start_potential.to_string(),
            "false",
        ])?;
        for s in &t.steps {
            w.write_record([
                walk.clone(),
                s.step.to_string(),
                (s.player + 1).to_string(),
                idx(s.profile_index),
                s.potential.to_string(),
                s.changed.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `walk,update,sweep,player,potential,change`; update 0 is the start.
pub fn write_sharing_trajectories<W: Write>(out: W, walks: &[SharingTrajectory]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["walk", "update", "sweep", "player", "potential", "change"])?;
    for (walk, t) in walks.iter().enumerate() {
        let walk = (walk + 1).to_string();
        w.write_record([
            walk.as_str(),
            "0",
            "0",
            "",
            &t.start_potential.to_string(),
            "",
        ])?;
        for s in &t.steps {
            w.write_record([
                walk.clone(),
                s.update.to_string(),
                s.sweep.to_string(),
                (s.player + 1).to_string(),
                s.potential.to_string(),
                s.change.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `profile_index,assignment,potential,is_ne`, one row per profile.
pub fn write_landscape<W: Write>(out: W, graph: &OrientedGraph, report: &NeReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["profile_index", "assignment", "potential", "is_ne"])?;
    let mut ne: Vec<u64> = report.indices().iter().map(|i| i.0).collect();
    ne.sort_unstable();
    for i in 0..graph.vertex_count() {
        let index = ProfileIndex(i);
        let assignment = graph
            .space()
            .profile(index)
            .assignment()
            .iter()
            .map(|s| (s + 1).to_string())
            .collect::<Vec<_>>()
            .join("-");
        w.write_record([
            index.one_based().to_string(),
            assignment,
            graph.potential(index).to_string(),
            ne.binary_search(&i).is_ok().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `bs,theoretical,empirical,std_err`.
pub fn write_fractions<W: Write>(
    out: W,
    theory: &NonAtomicEquilibrium,
    empirical: &EmpiricalFractions,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bs", "theoretical", "empirical", "std_err"])?;
    for (s, ((t, e), se)) in theory
        .fractions
        .fractions
        .iter()
        .zip(&empirical.mean.fractions)
        .zip(&empirical.std_err)
        .enumerate()
    {
        w.write_record([
            (s + 1).to_string(),
            t.to_string(),
            e.to_string(),
            se.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
