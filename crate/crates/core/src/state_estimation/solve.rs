use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::feeder_model::{BusId, Phase, RadialNetwork};
use crate::pmu_placement::ZonePartition;
use crate::power_flow::PhasorSet;

use super::model::{Func, Grid, System};
use super::{EstimationError, MeasurementSet};

type C = Complex64;

const RANK_TOL: f64 = 1e-10;
const MERGE_SIGMAS: f64 = 6.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Initialization {
    #[default]
    LinearPmu,
    Flat,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub initialization: Initialization,
    /// Worker threads for zone solves; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions {
            tolerance: 1e-6,
            max_iterations: 50,
            initialization: Initialization::LinearPmu,
            workers: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZoneStats {
    pub zone: usize,
    pub iterations: usize,
    pub chi_square: f64,
    /// Real measurement rows minus real state unknowns.
    pub degrees_of_freedom: usize,
    pub measurements: usize,
    pub states: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimationResult {
    pub voltages: PhasorSet,
    pub zones: Vec<ZoneStats>,
    pub chi_square: f64,
    pub degrees_of_freedom: usize,
}

/// One estimation problem: a state subset plus the measurements that only
/// reference it.
pub(crate) struct Block {
    pub zone: Option<usize>,
    pub states: Vec<usize>,
    pub system: System,
}

impl Block {
    pub fn build(
        grid: &Grid,
        set: &MeasurementSet,
        zone: Option<usize>,
        states: Vec<usize>,
        pseudo_buses: Option<&BTreeSet<BusId>>,
    ) -> Result<Block, EstimationError> {
        let mut map = vec![None; grid.states.len()];
        for (k, s) in states.iter().enumerate() {
            map[*s] = Some(k);
        }
        let mut funcs = Vec::new();
        let mut z = Vec::new();
        let mut sigma = Vec::new();
        for m in &set.measurements {
            let f = grid.func(m)?;
            if let (Func::Power { .. }, Some(home)) = (&f, pseudo_buses) {
                if !home.contains(&grid.resolve(m.bus())) {
                    continue;
                }
            }
            if let Some(f) = f.remap(&map) {
                funcs.push(f);
                z.push(C::new(m.value[0], m.value[1]));
                sigma.push(m.sigma);
            }
        }
        let n = states.len();
        Ok(Block {
            zone,
            states,
            system: System { funcs, z, sigma, n },
        })
    }

    fn rank_error(&self, detail: &str) -> EstimationError {
        EstimationError::RankDeficient {
            zone: self.zone,
            detail: detail.to_string(),
        }
    }

    /// Weighted least squares on the phasor measurements only, solved by a
    /// QR factorization of the whitened design matrix.
    pub fn linear(&self) -> Result<Vec<C>, EstimationError> {
        let sys = &self.system;
        let lin: Vec<usize> = (0..sys.funcs.len())
            .filter(|k| sys.funcs[*k].is_linear())
            .collect();
        let cols = 2 * sys.n;
        if 2 * lin.len() < cols {
            return Err(self.rank_error("fewer phasor rows than unknowns"));
        }
        let zero = vec![C::new(0.0, 0.0); sys.n];
        let mut h = DMatrix::zeros(2 * lin.len(), cols);
        let mut b = DVector::zeros(2 * lin.len());
        for (r, &k) in lin.iter().enumerate() {
            let s = 1.0 / sys.sigma[k];
            for (part, row) in sys.funcs[k].jacobian(&zero).iter().enumerate() {
                for &(c, v) in row {
                    h[(2 * r + part, c)] += s * v;
                }
            }
            b[2 * r] = s * sys.z[k].re;
            b[2 * r + 1] = s * sys.z[k].im;
        }
        let qr = h.qr();
        let r = qr.r();
        let scale = r
            .diagonal()
            .iter()
            .fold(0.0f64, |m, d: &f64| m.max(d.abs()));
        if r.diagonal()
            .iter()
            .any(|d: &f64| d.abs() <= RANK_TOL * scale.max(1.0))
        {
            return Err(self.rank_error("phasor measurements leave the state undetermined"));
        }
        qr.q_tr_mul(&mut b);
        let top = b.rows(0, cols).into_owned();
        let x = r
            .solve_upper_triangular(&top)
            .ok_or_else(|| self.rank_error("singular triangular factor"))?;
        Ok((0..sys.n).map(|j| C::new(x[2 * j], x[2 * j + 1])).collect())
    }

    fn normal_equations(&self, x: &[C]) -> (DMatrix<f64>, DVector<f64>) {
        let sys = &self.system;
        let n = 2 * sys.n;
        let mut g = DMatrix::zeros(n, n);
        let mut rhs = DVector::zeros(n);
        for (k, f) in sys.funcs.iter().enumerate() {
            let w = 1.0 / (sys.sigma[k] * sys.sigma[k]);
            let d = sys.z[k] - f.eval(x);
            for (row, r) in f.jacobian(x).iter().zip([d.re, d.im]) {
                for &(a, va) in row {
                    rhs[a] += w * va * r;
                    for &(b, vb) in row {
                        g[(a, b)] += w * va * vb;
                    }
                }
            }
        }
        (g, rhs)
    }

    pub fn initial(&self, grid: &Grid, init: Initialization) -> Result<Vec<C>, EstimationError> {
        match init {
            Initialization::LinearPmu => self.linear(),
            Initialization::Flat => Ok(self
                .states
                .iter()
                .map(|s| flat_angle(grid.states[*s].1))
                .collect()),
        }
    }

    pub fn gauss_newton(
        &self,
        mut x: Vec<C>,
        opts: &EstimatorOptions,
        want_variance: bool,
    ) -> Result<BlockSolution, EstimationError> {
        let sys = &self.system;
        let mut prev = f64::INFINITY;
        let mut grow = 0;
        let mut iterations = 0;
        let mut converged = false;
        while iterations < opts.max_iterations {
            iterations += 1;
            let (g, rhs) = self.normal_equations(&x);
            let chol = g
                .cholesky()
                .ok_or_else(|| self.rank_error("gain matrix is not positive definite"))?;
            let dx = chol.solve(&rhs);
            for j in 0..sys.n {
                x[j] += C::new(dx[2 * j], dx[2 * j + 1]);
            }
            let step = dx.amax();
            if !step.is_finite() {
                return Err(EstimationError::Diverged {
                    zone: self.zone,
                    iterations,
                });
            }
            if step < opts.tolerance {
                converged = true;
                break;
            }
            if step > prev {
                grow += 1;
                if grow >= 3 {
                    return Err(EstimationError::Diverged {
                        zone: self.zone,
                        iterations,
                    });
                }
            } else {
                grow = 0;
            }
            prev = step;
        }
        if !converged {
            return Err(EstimationError::MaxIterations {
                zone: self.zone,
                iterations,
            });
        }
        let variance = if want_variance {
            let (g, _) = self.normal_equations(&x);
            let inv = g
                .cholesky()
                .ok_or_else(|| self.rank_error("gain matrix is not positive definite"))?
                .inverse();
            (0..sys.n)
                .map(|j| inv[(2 * j, 2 * j)] + inv[(2 * j + 1, 2 * j + 1)])
                .collect()
        } else {
            Vec::new()
        };
        Ok(BlockSolution {
            chi_square: sys.weighted_sse(&x),
            dof: sys.real_rows().saturating_sub(2 * sys.n),
            measurements: sys.funcs.len(),
            iterations,
            x,
            variance,
        })
    }

    fn solve(
        &self,
        grid: &Grid,
        opts: &EstimatorOptions,
        want_variance: bool,
    ) -> Result<BlockSolution, EstimationError> {
        let x0 = self.initial(grid, opts.initialization)?;
        self.gauss_newton(x0, opts, want_variance)
    }
}

pub(crate) struct BlockSolution {
    pub x: Vec<C>,
    /// Complex variance `var(e) + var(f)` per state.
    pub variance: Vec<f64>,
    pub iterations: usize,
    pub chi_square: f64,
    pub dof: usize,
    pub measurements: usize,
}

fn flat_angle(p: Phase) -> C {
    let deg: f64 = match p {
        Phase::A => 0.0,
        Phase::B => -120.0,
        Phase::C => 120.0,
    };
    C::from_polar(1.0, deg.to_radians())
}

fn to_phasors(grid: &Grid, states: &[usize], x: &[C]) -> PhasorSet {
    let mut set = PhasorSet::new(grid.v_base, grid.aliases.clone());
    for (k, s) in states.iter().enumerate() {
        let (b, p) = grid.states[*s];
        set.insert(b, p, x[k] * grid.v_base);
    }
    set
}

fn stats(zone: usize, states: usize, sol: &BlockSolution) -> ZoneStats {
    ZoneStats {
        zone,
        iterations: sol.iterations,
        chi_square: sol.chi_square,
        degrees_of_freedom: sol.dof,
        measurements: sol.measurements,
        states,
    }
}

/// Phasor-only weighted least squares over every state in `buses`
/// (all phases of each). Pseudo-injections are ignored.
pub fn wls_linear_pmu(
    net: &RadialNetwork,
    buses: &BTreeSet<BusId>,
    set: &MeasurementSet,
) -> Result<PhasorSet, EstimationError> {
    let grid = Grid::new(net);
    let states: Vec<usize> = grid
        .states
        .iter()
        .enumerate()
        .filter(|(_, (b, _))| buses.contains(b))
        .map(|(k, _)| k)
        .collect();
    let block = Block::build(&grid, set, None, states, None)?;
    let x = block.linear()?;
    Ok(to_phasors(&grid, &block.states, &x))
}

/// Whole-network Gauss–Newton on phasor and pseudo-injection measurements.
pub fn wls_gauss_newton(
    net: &RadialNetwork,
    set: &MeasurementSet,
    opts: &EstimatorOptions,
) -> Result<EstimationResult, EstimationError> {
    validate_options(opts)?;
    let grid = Grid::new(net);
    let states: Vec<usize> = (0..grid.states.len()).collect();
    let block = Block::build(&grid, set, None, states, None)?;
    let sol = block.solve(&grid, opts, false)?;
    Ok(EstimationResult {
        voltages: to_phasors(&grid, &block.states, &sol.x),
        chi_square: sol.chi_square,
        degrees_of_freedom: sol.dof,
        zones: vec![stats(0, block.states.len(), &sol)],
    })
}

fn validate_options(opts: &EstimatorOptions) -> Result<(), EstimationError> {
    if !(opts.tolerance > 0.0 && opts.tolerance.is_finite()) || opts.max_iterations == 0 {
        return Err(EstimationError::InvalidOptions(format!(
            "tolerance {} / max iterations {}",
            opts.tolerance, opts.max_iterations
        )));
    }
    if opts.workers == Some(0) {
        return Err(EstimationError::InvalidOptions("zero workers".into()));
    }
    Ok(())
}

/// Zone state: every phase of the members plus, for each boundary branch
/// leaving the zone, the far bus on the branch phases.
fn zone_states(
    grid: &Grid,
    net: &RadialNetwork,
    partition: &ZonePartition,
    zone: usize,
) -> Vec<usize> {
    let members = &partition.zones[zone].members;
    let mut keep: BTreeSet<(BusId, Phase)> = BTreeSet::new();
    for &b in members {
        let b = grid.resolve(b);
        keep.extend(grid.states.iter().filter(|s| s.0 == b).copied());
    }
    for br in &net.branches {
        let (u, v) = (br.from_bus, br.to_bus);
        let far = match (members.contains(&u), members.contains(&v)) {
            (true, false) => v,
            (false, true) => u,
            _ => continue,
        };
        keep.extend(br.phases.iter().map(|p| (far, p)));
    }
    keep.iter().map(|s| grid.index[s]).collect()
}

/// Solves each zone independently and merges the results in zone order.
/// Buses estimated by several zones are combined by inverse-variance
/// weighting; a single-zone partition reproduces [`wls_gauss_newton`].
pub fn estimate_parallel(
    net: &RadialNetwork,
    partition: &ZonePartition,
    set: &MeasurementSet,
    opts: &EstimatorOptions,
) -> Result<EstimationResult, EstimationError> {
    validate_options(opts)?;
    let grid = Grid::new(net);
    let covered: BTreeSet<BusId> = partition
        .zones
        .iter()
        .flat_map(|z| z.members.iter().copied())
        .collect();
    let missing: Vec<BusId> = net
        .buses
        .iter()
        .map(|b| b.id)
        .filter(|b| !covered.contains(b))
        .collect();
    if !missing.is_empty() {
        return Err(EstimationError::InvalidPartition(format!(
            "buses outside every zone: {missing:?}"
        )));
    }
    let single = partition.zones.len() == 1;
    let blocks: Vec<Block> = (0..partition.zones.len())
        .map(|z| {
            let states = zone_states(&grid, net, partition, z);
            let home: BTreeSet<BusId> = partition.zones[z]
                .members
                .iter()
                .map(|b| grid.resolve(*b))
                .collect();
            Block::build(&grid, set, Some(z), states, Some(&home))
        })
        .collect::<Result<_, _>>()?;

    let run = || -> Vec<Result<BlockSolution, EstimationError>> {
        blocks
            .par_iter()
            .map(|b| b.solve(&grid, opts, !single))
            .collect()
    };
    let solved = match opts.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| EstimationError::InvalidOptions(e.to_string()))?
            .install(run),
        None => run(),
    };
    let solved: Vec<BlockSolution> = solved.into_iter().collect::<Result<_, _>>()?;

    let zones: Vec<ZoneStats> = blocks
        .iter()
        .zip(&solved)
        .enumerate()
        .map(|(z, (b, s))| stats(z, b.states.len(), s))
        .collect();
    let chi_square = solved.iter().map(|s| s.chi_square).sum();
    let degrees_of_freedom = solved.iter().map(|s| s.dof).sum();

    if single {
        return Ok(EstimationResult {
            voltages: to_phasors(&grid, &blocks[0].states, &solved[0].x),
            zones,
            chi_square,
            degrees_of_freedom,
        });
    }

    // (value, variance) contributions per state in zone order.
    let mut parts: BTreeMap<usize, Vec<(usize, C, f64)>> = BTreeMap::new();
    for (z, (b, s)) in blocks.iter().zip(&solved).enumerate() {
        for (k, g) in b.states.iter().enumerate() {
            parts
                .entry(*g)
                .or_default()
                .push((z, s.x[k], s.variance[k]));
        }
    }
    let mut merged = vec![C::new(0.0, 0.0); grid.states.len()];
    for (g, list) in &parts {
        if let [(_, x, _)] = list.as_slice() {
            merged[*g] = *x;
            continue;
        }
        let (z0, x0, v0) = list[0];
        for &(z, x, v) in &list[1..] {
            let limit = MERGE_SIGMAS * (v0 + v).sqrt();
            if (x - x0).norm() > limit {
                let (bus, phase) = grid.states[*g];
                return Err(EstimationError::MergeConflict {
                    bus,
                    phase,
                    zones: (z0, z),
                    difference_pu: (x - x0).norm(),
                    limit_pu: limit,
                });
            }
        }
        let mut num = C::new(0.0, 0.0);
        let mut den = 0.0;
        for &(_, x, v) in list {
            let w = 1.0 / v.max(f64::MIN_POSITIVE);
            num += x * w;
            den += w;
        }
        merged[*g] = num / den;
    }
    let all: Vec<usize> = (0..grid.states.len()).collect();
    Ok(EstimationResult {
        voltages: to_phasors(&grid, &all, &merged),
        zones,
        chi_square,
        degrees_of_freedom,
    })
}

/// Weighted squared residual of `set` at the state `voltages`.
pub fn chi_square_at(
    net: &RadialNetwork,
    set: &MeasurementSet,
    voltages: &PhasorSet,
) -> Result<f64, EstimationError> {
    let grid = Grid::new(net);
    let x = state_vector(&grid, voltages)?;
    let block = Block::build(&grid, set, None, (0..grid.states.len()).collect(), None)?;
    Ok(block.system.weighted_sse(&x))
}

pub(crate) fn state_vector(grid: &Grid, voltages: &PhasorSet) -> Result<Vec<C>, EstimationError> {
    grid.states
        .iter()
        .map(|(b, p)| {
            voltages.get_pu(*b, *p).ok_or_else(|| {
                EstimationError::IndexMismatch(format!("no voltage for bus {b} phase {p:?}"))
            })
        })
        .collect()
}

/// Analytic Jacobian of the full measurement model and its central
/// difference approximation at `voltages`, both over `[e0, f0, ...]` in pu.
pub fn jacobian_check(
    net: &RadialNetwork,
    set: &MeasurementSet,
    voltages: &PhasorSet,
    step: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>), EstimationError> {
    let grid = Grid::new(net);
    let x = state_vector(&grid, voltages)?;
    let block = Block::build(&grid, set, None, (0..grid.states.len()).collect(), None)?;
    let sys = &block.system;
    let analytic = sys.dense_jacobian(&x);
    let mut numeric = DMatrix::zeros(analytic.nrows(), analytic.ncols());
    for c in 0..analytic.ncols() {
        let d = if c % 2 == 0 {
            C::new(step, 0.0)
        } else {
            C::new(0.0, step)
        };
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[c / 2] += d;
        xm[c / 2] -= d;
        // residual = z - h, so the derivative of h is minus the residual's
        let rp = sys.residual(&xp);
        let rm = sys.residual(&xm);
        for r in 0..rp.len() {
            numeric[(r, c)] = -(rp[r] - rm[r]) / (2.0 * step);
        }
    }
    Ok((analytic, numeric))
}
