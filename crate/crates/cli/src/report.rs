//! Summary files and the plain-text report.

use std::fmt::Write as _;

use barker_core::diffusion::{GibbsConfig, GibbsSummary, ParameterSummary};
use barker_core::toy::{SandwichSummary, ToyConfig, ToySummary};
use serde::{Deserialize, Serialize};

/// Reference toy results at 2·10⁶ iterations.
pub const TOY_REFERENCE: ToyReference = ToyReference {
    mean: 20.012,
    variance: 23.989,
    acceptance_rate: 0.367,
    mean_loops: 4.7,
};

/// Reference Wright-Fisher posterior (201 observations, 50k iterations).
pub const WF_REFERENCE: WfReference = WfReference {
    gamma1: (7.649, 0.729, 6.502, 8.895),
    gamma2: (0.507, 0.012, 0.486, 0.527),
    correlation: -0.005,
    param_acceptance_rate: 0.357,
};

#[derive(Debug, Clone, Copy)]
pub struct ToyReference {
    pub mean: f64,
    pub variance: f64,
    pub acceptance_rate: f64,
    pub mean_loops: f64,
}

/// `(mean, sd, ci_low, ci_high)` per parameter.
#[derive(Debug, Clone, Copy)]
pub struct WfReference {
    pub gamma1: (f64, f64, f64, f64),
    pub gamma2: (f64, f64, f64, f64),
    pub correlation: f64,
    pub param_acceptance_rate: f64,
}

/// Contents of `summary.json`, tagged by the command that wrote it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Summary {
    Toy {
        config: ToyConfig,
        summary: ToySummary,
    },
    Sandwich {
        config: ToyConfig,
        summary: SandwichSummary,
    },
    WfInfer {
        config: GibbsConfig,
        n_obs: usize,
        summary: GibbsSummary,
    },
}

fn ess(e: Option<f64>) -> String {
    e.map_or_else(|| "-".to_string(), |v| format!("{v:.1}"))
}

fn param_row(out: &mut String, name: &str, p: &ParameterSummary, r: (f64, f64, f64, f64)) {
    let _ = writeln!(
        out,
        "{name:<8} {:>9.4} {:>8.4}  ({:.4}, {:.4})  {:>8}  | {:>7.3} {:>6.3}  ({:.3}, {:.3})",
        p.mean,
        p.sd,
        p.ci_low,
        p.ci_high,
        ess(p.ess),
        r.0,
        r.1,
        r.2,
        r.3
    );
}

/// Renders the report for a summary. Every number is finite by
/// construction of the summaries.
pub fn render(summary: &Summary) -> String {
    let mut out = String::new();
    match summary {
        Summary::Toy { config, summary: s } => {
            let r = TOY_REFERENCE;
            let _ = writeln!(out, "toy Poisson-Gamma mixture, factory Barker chain");
            let _ = writeln!(
                out,
                "iterations {}  burn-in {}  seed {}  trace length {}",
                s.iterations, s.burn_in, config.seed, s.trace_length
            );
            let _ = writeln!(out);
            let _ = writeln!(
                out,
                "{:<16} {:>12}  {:>10}",
                "quantity", "this run", "reference"
            );
            let rows = [
                ("mean", s.mean, r.mean),
                ("variance", s.variance, r.variance),
                ("acceptance_rate", s.acceptance_rate, r.acceptance_rate),
                ("mean_loops", s.mean_loops, r.mean_loops),
            ];
            for (name, v, reference) in rows {
                let _ = writeln!(out, "{name:<16} {v:>12.4}  {reference:>10.3}");
            }
            let _ = writeln!(out, "{:<16} {:>12.4}", "tv_distance", s.tv_distance);
            let _ = writeln!(out, "{:<16} {:>12}", "ess", ess(s.ess));
        }
        Summary::Sandwich { config, summary: s } => {
            let _ = writeln!(out, "asymptotic variance of f = identity on the toy target");
            let _ = writeln!(
                out,
                "iterations {} per kernel  burn-in {}  batches {}  seed {}",
                s.iterations, s.burn_in, s.n_batches, config.seed
            );
            let _ = writeln!(out);
            let _ = writeln!(
                out,
                "{:<8} {:>10} {:>12} {:>10} {:>11} {:>10} {:>10}",
                "kernel", "mean", "sigma2", "se", "acceptance", "loops", "ess"
            );
            for (name, k) in [("barker", &s.barker), ("mh", &s.mh)] {
                let _ = writeln!(
                    out,
                    "{name:<8} {:>10.4} {:>12.4} {:>10.4} {:>11.4} {:>10.4} {:>10.1}",
                    k.mean,
                    k.asymptotic_variance,
                    k.standard_error,
                    k.acceptance_rate,
                    k.mean_loops,
                    k.ess
                );
            }
            let _ = writeln!(out);
            let _ = writeln!(out, "target variance   {:.4}", s.target_variance);
            let _ = writeln!(
                out,
                "bounds            {:.4} <= sigma2_barker = {:.4} <= {:.4}",
                s.lower_bound, s.barker.asymptotic_variance, s.upper_bound
            );
            let _ = writeln!(out, "holds             {}", s.holds);
        }
        Summary::WfInfer {
            config,
            n_obs,
            summary: s,
        } => {
            let r = WF_REFERENCE;
            let _ = writeln!(out, "Wright-Fisher posterior, exact Gibbs sampler");
            let _ = writeln!(
                out,
                "observations {n_obs}  iterations {}  burn-in {}  path sweeps {}  seed {}",
                s.iterations, s.burn_in, config.path_sweeps, config.seed
            );
            let _ = writeln!(out);
            let _ = writeln!(
                out,
                "{:<8} {:>9} {:>8}  {:<20}  {:>8}  | reference (201 obs, 50k iterations)",
                "", "mean", "s.d.", "95% C.I.", "ess"
            );
            param_row(&mut out, "gamma1", &s.gamma1, r.gamma1);
            param_row(&mut out, "gamma2", &s.gamma2, r.gamma2);
            let _ = writeln!(out);
            let _ = writeln!(
                out,
                "{:<24} {:>9.4}  | {:>7.3}",
                "correlation", s.correlation, r.correlation
            );
            let _ = writeln!(
                out,
                "{:<24} {:>9.4}  | {:>7.3}",
                "parameter acceptance", s.param_acceptance_rate, r.param_acceptance_rate
            );
            let _ = writeln!(
                out,
                "{:<24} {:>9.4}",
                "parameter mean loops", s.param_mean_loops
            );
            let _ = writeln!(
                out,
                "{:<24} {:>9.4}",
                "path acceptance", s.path_acceptance_rate
            );
            let _ = writeln!(out, "{:<24} {:>9.4}", "path mean loops", s.path_mean_loops);
        }
    }
    out
}
