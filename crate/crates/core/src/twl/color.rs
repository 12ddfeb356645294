use std::collections::HashMap;
use std::io::Write;

use super::Dtdg;
use crate::error::{Error, Result};

/// Grid that features are rounded to before being compared as colors.
pub const FEATURE_QUANTUM: f64 = 1e-9;

/// Colors of every (node, time) pair after `step` refinements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColoringState {
    /// `colors[t][v]`, dense ids starting at 0.
    pub colors: Vec<Vec<usize>>,
    pub step: usize,
    /// Number of distinct colors in the palette this state was drawn from.
    pub classes: usize,
}

impl ColoringState {
    /// Sorted color multiset of snapshot `t`.
    pub fn multiset(&self, t: usize) -> Vec<usize> {
        let mut m = self.colors[t].clone();
        m.sort_unstable();
        m
    }

    /// Number of distinct colors in snapshot `t`.
    pub fn distinct(&self, t: usize) -> usize {
        let mut m = self.multiset(t);
        m.dedup();
        m.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Key {
    Feature(Vec<i64>),
    Tuple(usize, Option<usize>, Vec<usize>),
}

#[derive(Default)]
struct Palette(HashMap<Key, usize>);

impl Palette {
    fn id(&mut self, key: Key) -> usize {
        let next = self.0.len();
        *self.0.entry(key).or_insert(next)
    }
}

fn quantize(row: ndarray::ArrayView1<'_, f64>) -> Vec<i64> {
    // Saturating cast; features beyond ±9e9 collapse, which is far outside any
    // normalized input.
    row.iter().map(|v| (v / FEATURE_QUANTUM).round() as i64).collect()
}

fn init_shared(graphs: &[&Dtdg]) -> Vec<ColoringState> {
    let mut palette = Palette::default();
    let colors: Vec<Vec<Vec<usize>>> = graphs
        .iter()
        .map(|g| {
            g.snapshots()
                .iter()
                .map(|s| s.features().rows().into_iter().map(|r| palette.id(Key::Feature(quantize(r)))).collect())
                .collect()
        })
        .collect();
    let classes = palette.0.len();
    colors.into_iter().map(|colors| ColoringState { colors, step: 0, classes }).collect()
}

fn refine_shared(graphs: &[&Dtdg], states: &[ColoringState]) -> Vec<ColoringState> {
    let mut palette = Palette::default();
    let colors: Vec<Vec<Vec<usize>>> = graphs
        .iter()
        .zip(states)
        .map(|(g, st)| {
            assert_eq!(st.colors.len(), g.steps(), "coloring does not match the graph's snapshot count");
            (0..g.steps())
                .map(|t| {
                    (0..g.nodes())
                        .map(|v| {
                            let prev = if t > 0 { Some(st.colors[t - 1][v]) } else { None };
                            let mut nb: Vec<usize> = g.neighbors(t, v).iter().map(|&u| st.colors[t][u]).collect();
                            nb.sort_unstable();
                            palette.id(Key::Tuple(st.colors[t][v], prev, nb))
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let classes = palette.0.len();
    let step = states.first().map_or(0, |s| s.step) + 1;
    colors.into_iter().map(|colors| ColoringState { colors, step, classes }).collect()
}

/// Initial colors from quantized node features; featureless graphs get a
/// single color.
pub fn init_colors(g: &Dtdg) -> ColoringState {
    init_shared(&[g]).pop().expect("one state")
}

/// One refinement step: each (v, t) is recolored by its own color, its color
/// at t-1 (absent at t = 0) and the sorted multiset of its neighbors' colors.
///
/// # Panics
/// If `state` was not produced for a graph with the same snapshot count.
pub fn refine(g: &Dtdg, state: &ColoringState) -> ColoringState {
    refine_shared(&[g], std::slice::from_ref(state)).pop().expect("one state")
}

/// Refines until the partition stops changing or `max_steps` is reached.
pub fn refine_to_fixpoint(g: &Dtdg, max_steps: usize) -> ColoringState {
    let mut state = init_colors(g);
    while state.step < max_steps {
        let next = refine(g, &state);
        if next.classes == state.classes {
            break;
        }
        state = next;
    }
    state
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    NonIsomorphic,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WlOutcome {
    pub verdict: Verdict,
    /// Earliest step at which the end-time multisets differed.
    pub separating_step: Option<usize>,
    /// Refinement steps performed.
    pub steps_run: usize,
    /// Colorings of both graphs at every step, sharing one palette per step.
    pub history: Vec<[ColoringState; 2]>,
}

/// Runs refinement on both graphs in parallel with a shared palette and
/// reports non-isomorphism as soon as the color multisets of the final
/// snapshot differ. `steps` defaults to N·T, past which the partition is
/// guaranteed stable.
pub fn wl_test(g1: &Dtdg, g2: &Dtdg, steps: Option<usize>) -> Result<WlOutcome> {
    if g1.nodes() != g2.nodes() || g1.steps() != g2.steps() {
        return Err(Error::shape(format!(
            "graphs differ in size: {} nodes × {} snapshots vs {} × {}",
            g1.nodes(),
            g1.steps(),
            g2.nodes(),
            g2.steps()
        )));
    }
    let cap = steps.unwrap_or(g1.nodes() * g1.steps());
    let end = g1.steps() - 1;
    let graphs = [g1, g2];
    let mut states = init_shared(&graphs);
    let mut history = Vec::new();
    loop {
        let step = states[0].step;
        let differ = states[0].multiset(end) != states[1].multiset(end);
        history.push([states[0].clone(), states[1].clone()]);
        if differ {
            return Ok(WlOutcome { verdict: Verdict::NonIsomorphic, separating_step: Some(step), steps_run: step, history });
        }
        if step >= cap {
            break;
        }
        let next = refine_shared(&graphs, &states);
        if next[0].classes == states[0].classes {
            break;
        }
        states = next;
    }
    let steps_run = states[0].step;
    Ok(WlOutcome { verdict: Verdict::Inconclusive, separating_step: None, steps_run, history })
}

/// Whether (u, t) and (v, t) carry different colors after `steps`
/// refinements.
pub fn distinguishable(g: &Dtdg, u: usize, v: usize, t: usize, steps: usize) -> Result<bool> {
    if u >= g.nodes() || v >= g.nodes() {
        return Err(Error::param(format!("node index out of range for {} nodes", g.nodes())));
    }
    if t >= g.steps() {
        return Err(Error::param(format!("time {t} out of range for {} snapshots", g.steps())));
    }
    let state = refine_to_fixpoint(g, steps);
    Ok(state.colors[t][u] != state.colors[t][v])
}

/// Writes `graph,step,time,node,color` rows for a sequence of colorings,
/// where each inner slice holds the states of all graphs at one step.
pub fn write_color_table<W: Write>(writer: W, history: &[Vec<&ColoringState>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["graph", "step", "time", "node", "color"])?;
    for states in history {
        for (gi, st) in states.iter().enumerate() {
            for (t, row) in st.colors.iter().enumerate() {
                for (v, c) in row.iter().enumerate() {
                    w.serialize((gi, st.step, t, v, c))?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}
