//! Stage plans (`q → n` jumps) and the end-to-end `W_n` pipeline on the
//! ideal and spin-torque backends.

use std::fmt;
use std::str::FromStr;

use log::info;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ideal::{correct_phase, evolve_coeffs, plan_jump, w_state_vector, PhaseBranch};
use crate::kraus::{
    calibrate_rz_per_electron, estimate_electrons, estimate_phase_electrons, fidelity, fit_effective_exchange,
    run_until, Engine, KrausPair, RunOptions, StopCriterion, DEFAULT_CAP,
};
use crate::linalg::CVector;
use crate::scattering::{ChannelConfig, InjectedSpin};
use crate::state::{Basis, DensityMatrix, PhaseRotate, StateVector};
use crate::trace::EvolutionTrace;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// `1 → 4 → 16 → … → n`
    MaxForward,
    /// `q_k = ⌈n / 4^k⌉` read backwards.
    #[default]
    MinBackward,
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max-forward" => Ok(Strategy::MaxForward),
            "min-backward" => Ok(Strategy::MinBackward),
            other => Err(Error::InvalidArgument(format!(
                "unknown strategy {other:?} (max-forward | min-backward)"
            ))),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::MaxForward => "max-forward",
            Strategy::MinBackward => "min-backward",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub q: usize,
    pub n: usize,
    /// Ideal waiting time.
    pub t_w: f64,
    /// Spin-torque electrons, filled in by [`predict_electrons`].
    pub predicted_electrons: Option<f64>,
    pub theta: f64,
    pub phi: f64,
    pub target_qubits: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanTotals {
    pub stages: usize,
    /// Initial bit flip plus every phase-correction rotation.
    pub single_qubit_gates: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StagePlan {
    pub n_final: usize,
    pub strategy: Strategy,
    pub branch: PhaseBranch,
    /// Exchange constant the ideal timings refer to.
    pub j: f64,
    pub stages: Vec<Stage>,
    pub totals: PlanTotals,
}

/// Register sizes visited from 1 to `n_final`.
pub fn chain(n_final: usize, strategy: Strategy) -> Vec<usize> {
    let mut sizes = vec![1];
    match strategy {
        Strategy::MaxForward => {
            let mut q = 1;
            while q < n_final {
                q = (4 * q).min(n_final);
                sizes.push(q);
            }
        }
        Strategy::MinBackward => {
            let mut back = vec![n_final];
            let mut p = 4usize;
            while *back.last().unwrap() > 1 {
                back.push(n_final.div_ceil(p));
                p = p.saturating_mul(4);
            }
            back.reverse();
            sizes = back;
        }
    }
    sizes
}

/// Plan with `J = 1` and first-`q` phase correction.
pub fn schedule(n_final: usize, strategy: Strategy) -> Result<StagePlan> {
    schedule_with(n_final, strategy, 1.0, PhaseBranch::FirstQ)
}

pub fn schedule_with(n_final: usize, strategy: Strategy, j: f64, branch: PhaseBranch) -> Result<StagePlan> {
    if n_final == 0 {
        return Err(Error::InvalidArgument("n_final must be at least 1".into()));
    }
    let sizes = chain(n_final, strategy);
    let mut stages = Vec::with_capacity(sizes.len().saturating_sub(1));
    for w in sizes.windows(2) {
        stages.push(plan_stage(w[0], w[1], j, branch)?);
    }
    let gates = 1 + stages.iter().map(|s| s.target_qubits.len()).sum::<usize>();
    Ok(StagePlan {
        n_final,
        strategy,
        branch,
        j,
        totals: PlanTotals {
            stages: stages.len(),
            single_qubit_gates: gates,
        },
        stages,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdealRun {
    pub state: StateVector,
    pub stage_fidelities: Vec<f64>,
}

/// Exact bit flip, then for each stage the closed-form evolution for `t_w`
/// followed by exact `R_z` on the target qubits.
pub fn run_ideal(plan: &StagePlan) -> Result<IdealRun> {
    let mut psi = StateVector::basis_state(Basis::OneHot { qubits: 1 }, 1)?;
    let mut fids = Vec::with_capacity(plan.stages.len());
    for stage in &plan.stages {
        psi = ideal_stage(&psi, stage, plan.j)?;
        fids.push(psi.inner(&w_state_vector(stage.n)?)?.norm());
    }
    Ok(IdealRun {
        state: psi,
        stage_fidelities: fids,
    })
}

/// One ideal stage on a one-hot `q`-qubit state.
pub fn ideal_stage(psi: &StateVector, stage: &Stage, j: f64) -> Result<StateVector> {
    if psi.basis.qubits() != stage.q {
        return Err(Error::InvalidArgument(format!(
            "stage {}→{} does not follow a {}-qubit register",
            stage.q,
            stage.n,
            psi.basis.qubits()
        )));
    }
    let grown = psi.to_basis(Basis::OneHot { qubits: stage.q })?.append_ground(stage.n - stage.q);
    let c = evolve_coeffs(stage.n, j, stage.t_w)?;
    let total: num_complex::Complex64 = grown.amps.iter().sum();
    let amps = CVector::from_iterator(stage.n, grown.amps.iter().map(|&x| (c.a - c.b) * x + c.b * total));
    let mut out = StateVector::new(grown.basis, amps)?;
    for &q in &stage.target_qubits {
        out.apply_rz(q, stage.phi)?;
    }
    Ok(out)
}

/// Single `q → n` stage for an explicit exchange constant and branch.
pub fn plan_stage(q: usize, n: usize, j: f64, branch: PhaseBranch) -> Result<Stage> {
    let jump = plan_jump(q, n, j)?;
    let corr = correct_phase(&jump, branch);
    Ok(Stage {
        q: jump.q,
        n: jump.n,
        t_w: jump.t_w,
        predicted_electrons: None,
        theta: jump.theta,
        phi: corr.phi,
        target_qubits: corr.qubits,
    })
}

/// Spin-torque backend settings. `template.n` is replaced per stage.
#[derive(Clone, Debug, PartialEq)]
pub struct TorqueOptions {
    pub template: ChannelConfig,
    pub engine: Engine,
    /// Flip the first qubit with a y-polarized channel; otherwise exactly.
    pub torque_flip: bool,
    pub flip_threshold: f64,
    pub cap: usize,
}

impl Default for TorqueOptions {
    fn default() -> Self {
        Self {
            template: ChannelConfig::reference(1),
            engine: Engine::Sector,
            torque_flip: true,
            flip_threshold: 0.999,
            cap: DEFAULT_CAP,
        }
    }
}

impl TorqueOptions {
    fn register(&self, n: usize) -> Basis {
        match self.engine {
            Engine::Sector => Basis::Sector { qubits: n },
            Engine::Full => Basis::Full { qubits: n },
        }
    }

    fn run_options(&self) -> RunOptions {
        RunOptions {
            cap: self.cap,
            ..RunOptions::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct Prepared {
    pub rho: DensityMatrix,
    pub fidelity: f64,
    pub electrons: usize,
    pub trace: Option<EvolutionTrace>,
}

/// Flip qubit 1 of a register that starts in `|0…0⟩`.
///
/// With `torque` the flip is a y-polarized single-qubit channel run until
/// the fidelity to `|1⟩` peaks; a peak below `threshold` is an error.
pub fn prepare_excitation(rho: &DensityMatrix, torque: Option<&TorqueOptions>) -> Result<Prepared> {
    let n = rho.basis.qubits();
    if (rho.population(0) - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidState("excitation preparation needs the register in |0…0⟩".into()));
    }
    let Some(opts) = torque else {
        let mut flipped = StateVector::basis_state(rho.basis, 1 << (n - 1))?.density();
        flipped.basis = rho.basis;
        return Ok(Prepared {
            rho: flipped,
            fidelity: 1.0,
            electrons: 0,
            trace: None,
        });
    };
    let channel = opts.template.with_n(1).with_injected(InjectedSpin::y_plus());
    let pair = KrausPair::for_channel(&channel, Engine::Full)?;
    let one = Basis::Full { qubits: 1 };
    let target = StateVector::basis_state(one, 1)?;
    let out = run_until(
        &DensityMatrix::ground(one),
        &[pair],
        &StopCriterion::FidelityMax(target),
        &opts.run_options(),
    )?;
    let fid = out.at_stop().fidelity.unwrap_or(0.0);
    if fid < opts.flip_threshold {
        return Err(Error::PreparationFailure {
            fidelity: fid,
            threshold: opts.flip_threshold,
        });
    }
    let grown = out.rho.append_ground(n - 1).to_basis(rho.basis)?;
    Ok(Prepared {
        rho: grown,
        fidelity: fid,
        electrons: out.m_stop,
        trace: Some(out.trace),
    })
}

#[derive(Clone, Debug)]
pub struct StageOutcome {
    pub q: usize,
    pub n: usize,
    pub entangle_electrons: usize,
    /// Electrons per phase channel; all channels run in lockstep.
    pub phase_electrons: usize,
    pub phase_channels: usize,
    /// Diag product at the entangling stop.
    pub peak_log_product: f64,
    pub fidelity_before_phase: f64,
    pub fidelity: f64,
    pub purity: f64,
    pub entangle_trace: EvolutionTrace,
    pub phase_trace: EvolutionTrace,
    pub rho: DensityMatrix,
}

fn with_stage(stage: usize, q: usize, n: usize) -> impl Fn(Error) -> Error {
    move |e| Error::Stage {
        stage,
        q,
        n,
        source: Box::new(e),
    }
}

/// One `q → n` stage on the torque backend: grow the register with fresh
/// `|0⟩` qubits, entangle until the one-hot product peaks, then rotate qubits
/// `1..=q` until the fidelity to `W_n` peaks. `q → n` need not be a feasible
/// ideal jump (single-excitation sharing beyond `4q` is allowed here).
pub fn torque_stage(rho_q: &DensityMatrix, n: usize, opts: &TorqueOptions) -> Result<StageOutcome> {
    let q = rho_q.basis.qubits();
    if n <= q {
        return Err(Error::InvalidArgument(format!("stage must grow the register ({q}→{n})")));
    }
    let register = opts.register(n);
    let rho0 = rho_q.append_ground(n - q).to_basis(register)?;
    let target = w_state_vector(n)?;

    let pair = KrausPair::for_channel(&opts.template.with_n(n), opts.engine)?;
    let entangle = run_until(
        &rho0,
        &[pair],
        &StopCriterion::DiagProductMax,
        &RunOptions {
            track: Some(target.clone()),
            ..opts.run_options()
        },
    )
    ?;
    let before = entangle.at_stop().fidelity.unwrap_or(0.0);
    let peak = entangle.at_stop().log_product;

    let single = KrausPair::for_channel(&opts.template.with_n(1), Engine::Full)?;
    let maps = (1..=q)
        .map(|k| single.embed_single_qubit(register, k))
        .collect::<Result<Vec<_>>>()
        ?;
    // The rotation only turns one way, so the state has to be carried past
    // its starting point; a peak at m = 0 is not a correction.
    let phase = run_until(
        &entangle.rho,
        &maps,
        &StopCriterion::FidelityMax(target),
        &RunOptions {
            allow_boundary: false,
            ..opts.run_options()
        },
    )
    ?;
    let fid = phase.at_stop().fidelity.unwrap_or(0.0);
    info!(
        "stage {q}→{n}: {} + {} electrons, fidelity {fid:.6}",
        entangle.m_stop, phase.m_stop
    );
    Ok(StageOutcome {
        q,
        n,
        entangle_electrons: entangle.m_stop,
        phase_electrons: phase.m_stop,
        phase_channels: q,
        peak_log_product: peak,
        fidelity_before_phase: before,
        fidelity: fid,
        purity: phase.rho.purity(),
        entangle_trace: entangle.trace,
        phase_trace: phase.trace,
        rho: phase.rho,
    })
}

#[derive(Clone, Debug)]
pub struct TorqueRun {
    pub rho: DensityMatrix,
    pub flip: Prepared,
    pub stages: Vec<StageOutcome>,
    pub fidelity: f64,
}

impl TorqueRun {
    /// Flip electrons plus every stage's entangling and phase stops.
    pub fn total_electrons(&self) -> usize {
        self.flip.electrons
            + self
                .stages
                .iter()
                .map(|s| s.entangle_electrons + s.phase_electrons)
                .sum::<usize>()
    }
}

pub fn run_torque(plan: &StagePlan, opts: &TorqueOptions) -> Result<TorqueRun> {
    let ground = DensityMatrix::ground(opts.register(1));
    let flip = prepare_excitation(&ground, opts.torque_flip.then_some(opts))?;
    let mut rho = flip.rho.clone();
    let mut stages = Vec::with_capacity(plan.stages.len());
    for (idx, stage) in plan.stages.iter().enumerate() {
        if rho.basis.qubits() != stage.q {
            return Err(Error::InvalidArgument(format!(
                "stage {}→{} does not follow a {}-qubit register",
                stage.q,
                stage.n,
                rho.basis.qubits()
            )));
        }
        let out = torque_stage(&rho, stage.n, opts).map_err(with_stage(idx, stage.q, stage.n))?;
        rho = out.rho.clone();
        stages.push(out);
    }
    let fidelity = fidelity(&rho, &w_state_vector(plan.n_final)?)?;
    Ok(TorqueRun {
        rho,
        flip,
        stages,
        fidelity,
    })
}

/// Exact `W_q` on the torque register, as a seed for a single stage.
pub fn w_seed(q: usize, opts: &TorqueOptions) -> Result<DensityMatrix> {
    w_state_vector(q)?.to_basis(opts.register(q)).map(|s| s.density())
}

/// Predicted electrons for one `q → n` stage on a channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ElectronPrediction {
    pub q: usize,
    pub n: usize,
    pub j_eff: f64,
    pub entangle: f64,
    /// Relative phase the first `q` qubits must gain.
    pub phi_needed: f64,
    pub phi_per_electron: f64,
    pub phase: f64,
}

pub fn predict_stage(q: usize, n: usize, template: &ChannelConfig) -> Result<ElectronPrediction> {
    let pair = KrausPair::for_channel(&template.with_n(n), Engine::Sector)?;
    let fit = fit_effective_exchange(&pair.m0, pair.basis)?;
    let entangle = estimate_electrons(n, q, fit.j_eff)?;
    let jump = plan_jump(q, n, fit.j_eff)?;
    let phi_needed = correct_phase(&jump, PhaseBranch::FirstQ).phi;
    let rz = calibrate_rz_per_electron(&template.with_n(1))?;
    Ok(ElectronPrediction {
        q,
        n,
        j_eff: fit.j_eff,
        entangle,
        phi_needed,
        phi_per_electron: rz.phi_per_electron,
        phase: estimate_phase_electrons(phi_needed, rz.phi_per_electron)?,
    })
}

/// Fill `predicted_electrons` (entangling plus phase) for every stage.
pub fn predict_electrons(plan: &mut StagePlan, template: &ChannelConfig) -> Result<()> {
    for (idx, stage) in plan.stages.iter_mut().enumerate() {
        let p = predict_stage(stage.q, stage.n, template).map_err(with_stage(idx, stage.q, stage.n))?;
        stage.predicted_electrons = Some(p.entangle + p.phase);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chains() {
        assert_eq!(chain(10, Strategy::MinBackward), vec![1, 3, 10]);
        assert_eq!(chain(10, Strategy::MaxForward), vec![1, 4, 10]);
        assert_eq!(chain(64, Strategy::MaxForward), vec![1, 4, 16, 64]);
        assert_eq!(chain(1, Strategy::MinBackward), vec![1]);
        assert_eq!(chain(1, Strategy::MaxForward), vec![1]);
        assert_eq!(chain(3, Strategy::MaxForward), vec![1, 3]);
    }

    #[test]
    fn schedule_examples() {
        let p = schedule(3, Strategy::MinBackward).unwrap();
        assert_eq!(p.stages.len(), 1);
        assert_eq!((p.stages[0].q, p.stages[0].n), (1, 3));
        assert_eq!(p.totals.single_qubit_gates, 2);
        let p = schedule(1, Strategy::MaxForward).unwrap();
        assert!(p.stages.is_empty());
        assert_eq!(p.totals.single_qubit_gates, 1);
        assert!(schedule(0, Strategy::MaxForward).is_err());
    }

    #[test]
    fn ideal_pipeline_exact() {
        for n in [1, 4, 16, 10] {
            let run = run_ideal(&schedule(n, Strategy::MaxForward).unwrap()).unwrap();
            let f = run.state.inner(&w_state_vector(n).unwrap()).unwrap().norm();
            assert!((1.0 - f).abs() < 1e-12, "n={n} f={f}");
        }
        let run = run_ideal(&schedule(1, Strategy::MinBackward).unwrap()).unwrap();
        assert_eq!(run.state.amps[0], num_complex::Complex64::new(1.0, 0.0));
    }

    #[test]
    fn other_branch_also_exact() {
        let plan = schedule_with(12, Strategy::MinBackward, -0.7, PhaseBranch::LastNMinusQ).unwrap();
        let run = run_ideal(&plan).unwrap();
        assert!(run.stage_fidelities.iter().all(|f| (1.0 - f).abs() < 1e-12));
    }

    #[test]
    fn plan_json_round_trip() {
        let p = schedule(10, Strategy::MinBackward).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"strategy\":\"min-backward\""));
        let back: StagePlan = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn excited_input_rejected() {
        let rho = StateVector::basis_state(Basis::Sector { qubits: 2 }, 2).unwrap().density();
        assert!(prepare_excitation(&rho, None).is_err());
        let ground = DensityMatrix::ground(Basis::Sector { qubits: 2 });
        let p = prepare_excitation(&ground, None).unwrap();
        assert_eq!(p.rho.population(2), 1.0);
    }

    #[test]
    fn torque_flip_meets_threshold() {
        let opts = TorqueOptions::default();
        let ground = DensityMatrix::ground(Basis::Sector { qubits: 3 });
        let p = prepare_excitation(&ground, Some(&opts)).unwrap();
        assert!(p.fidelity >= 0.999);
        assert!(p.electrons > 0);
        let strict = TorqueOptions {
            flip_threshold: 0.99999,
            ..TorqueOptions::default()
        };
        assert!(matches!(
            prepare_excitation(&ground, Some(&strict)),
            Err(Error::PreparationFailure { .. })
        ));
    }
}
