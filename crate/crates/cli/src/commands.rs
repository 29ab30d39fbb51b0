//! Subcommand implementations.

use std::fs;
use std::path::Path;

use lmsss::example::{bench_inversions, build_example, oracle_frf, ExampleConfig};
use lmsss::io::{
    read_frf, read_labels, read_model, read_pairing, write_frf, write_json, write_model,
    write_pairing,
};
use lmsss::reference::{
    lmfbs_couple_lenient, lmfbs_decouple_lenient, retain_unique_partial, PartialFrf,
};
use lmsss::{
    build_model, build_state_reduction, compare_frf, couple_accel, couple_disp, couple_vel,
    decouple, decouple_minimal, dynamic_stiffness, frequency_grid, ncf_transform, perturb_frf,
    reduce_minimal, retain_unique_dofs, sacf_transform, synth_frf,
    to_acceleration, to_modal_form, to_velocity, ucf_transform, CouplingProblem, DofLabel, Error,
    Execution, FrfMatrix, InterfacePairing, MechanicalSystem, NoiseSpec, OutputKind, ResponseKind,
    Result, StateSpaceModel,
};

use crate::{
    BenchArgs, Command, CompareArgs, CoupleArgs, DecoupleArgs, ExampleCmd, Form, FrfArgs, FrfCmd,
    Grid, Kind, LmfbsCmd, StiffnessArgs, System, TransformArgs,
};

/// Result of a command that ran to completion.
#[derive(Debug, PartialEq)]
pub enum Outcome {
    Ok,
    /// Output was written but a check failed.
    Failed(String),
}

pub fn run(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Example(c) => example(c),
        Command::Couple(a) => couple(a),
        Command::Decouple(a) => decouple_cmd(a),
        Command::Transform(a) => transform(a),
        Command::Frf(a) => frf(a),
        Command::Lmfbs(c) => lmfbs(c),
        Command::Stiffness(a) => stiffness(a),
        Command::Compare(a) => compare(a),
        Command::Bench(a) => bench(a),
    }
}

impl From<Kind> for OutputKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Disp => OutputKind::Displacement,
            Kind::Vel => OutputKind::Velocity,
            Kind::Accel => OutputKind::Acceleration,
        }
    }
}

fn read_config(path: Option<&Path>) -> Result<ExampleConfig> {
    let cfg = match path {
        Some(p) => serde_json::from_str(&fs::read_to_string(p)?)?,
        None => ExampleConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn grid(g: &Grid) -> Result<Vec<f64>> {
    frequency_grid(g.fmin, g.fmax, g.df)
}

fn example_model(sys: &MechanicalSystem, kind: Kind, modal: bool) -> Result<StateSpaceModel> {
    if !modal {
        return build_model(sys, kind.into());
    }
    let m = to_modal_form(&build_model(sys, OutputKind::Displacement)?)?;
    match kind {
        Kind::Disp => Ok(m),
        Kind::Vel => to_velocity(&m),
        Kind::Accel => to_acceleration(&m),
    }
}

fn example(cmd: ExampleCmd) -> Result<Outcome> {
    match cmd {
        ExampleCmd::Build { config, out_dir, kind, modal } => {
            let ex = build_example(&read_config(config.as_deref())?)?;
            fs::create_dir_all(&out_dir)?;
            for (name, sys) in [("a", &ex.a), ("b", &ex.b), ("assembled", &ex.assembled)] {
                write_model(&out_dir.join(format!("{name}.json")), &example_model(sys, kind, modal)?)?;
            }
            write_pairing(&out_dir.join("pairing.json"), &ex.pairing)?;
        }
        ExampleCmd::Oracle { config, system, grid: g, out } => {
            let ex = build_example(&read_config(config.as_deref())?)?;
            let sys = match system {
                System::A => &ex.a,
                System::B => &ex.b,
                System::Assembled => &ex.assembled,
            };
            write_frf(&out, &oracle_frf(sys, &grid(&g)?)?)?;
        }
    }
    Ok(Outcome::Ok)
}

/// Interface DOFs of `m` in pairing order.
fn interface_of(m: &StateSpaceModel, pairing: &InterfacePairing) -> Vec<DofLabel> {
    pairing
        .pairs
        .iter()
        .flat_map(|p| [&p.a, &p.b])
        .filter(|l| m.input_index(l).is_some())
        .cloned()
        .collect()
}

fn apply_form(m: &StateSpaceModel, interface: &[DofLabel], form: Form) -> Result<Option<StateSpaceModel>> {
    let r = match form {
        Form::None => return Ok(None),
        Form::Ucf => ucf_transform(m, interface)?,
        Form::Sacf => sacf_transform(m, interface)?,
        Form::Ncf => ncf_transform(m, interface)?,
    };
    Ok(Some(r.0))
}

fn couple(a: CoupleArgs) -> Result<Outcome> {
    if a.minimal && a.form == Form::None {
        return Err(Error::Precondition("--minimal needs --form ucf, sacf or ncf".into()));
    }
    let pairing = read_pairing(&a.pairs)?;
    let models = a
        .models
        .iter()
        .map(|p| {
            let m = read_model(p)?;
            Ok(apply_form(&m, &interface_of(&m, &pairing), a.form)?.unwrap_or(m))
        })
        .collect::<Result<Vec<_>>>()?;
    let p = CouplingProblem::new(models, pairing)?;
    let mut out = match a.variant {
        Kind::Accel => couple_accel(&p)?,
        Kind::Disp => couple_disp(&p)?,
        Kind::Vel => couple_vel(&p)?,
    };
    if a.minimal {
        out = reduce_minimal(&out, &build_state_reduction(&out.state_tags, &p.pairing)?)?;
    }
    if a.retain_unique {
        out = retain_unique_dofs(&out, &p.input_map, &p.output_map)?;
    }
    write_model(&a.out, &out)?;
    Ok(Outcome::Ok)
}

fn decouple_cmd(a: DecoupleArgs) -> Result<Outcome> {
    let assembly = read_model(&a.assembly)?;
    let removed = read_model(&a.remove)?;
    let pairing = read_pairing(&a.pairs)?;
    let keep = read_labels(&a.keep)?;
    let out = if a.minimal {
        decouple_minimal(&assembly, &removed, &pairing, &keep)?
    } else {
        decouple(&assembly, &removed, &pairing, &keep)?
    };
    write_model(&a.out, &out)?;
    Ok(Outcome::Ok)
}

fn transform(a: TransformArgs) -> Result<Outcome> {
    let mut m = read_model(&a.model)?;
    if a.modal {
        m = to_modal_form(&m)?;
    }
    let interface = read_labels(&a.interface)?;
    let (out, tr) = match a.form {
        Form::None => {
            write_model(&a.out, &m)?;
            return Ok(Outcome::Ok);
        }
        Form::Ucf => ucf_transform(&m, &interface)?,
        Form::Sacf => sacf_transform(&m, &interface)?,
        Form::Ncf => ncf_transform(&m, &interface)?,
    };
    write_model(&a.out, &out)?;
    if let Some(r) = a.report {
        write_json(&r, &tr.report())?;
    }
    Ok(Outcome::Ok)
}

fn frf(a: FrfArgs) -> Result<Outcome> {
    match a.action {
        Some(FrfCmd::Perturb { input, sigma, seed, out }) => {
            // the CSV carries no response kind and noise does not depend on it
            let h = read_frf(&input, ResponseKind::Accelerance)?;
            write_frf(&out, &perturb_frf(&h, NoiseSpec { sigma, seed })?)?;
        }
        None => {
            let (Some(model), Some(g), Some(out)) = (a.model, a.grid, a.out) else {
                unreachable!("clap enforces the synthesis arguments");
            };
            write_frf(&out, &synth_frf(&read_model(&model)?, &grid(&g)?)?)?;
        }
    }
    Ok(Outcome::Ok)
}

fn write_partial(path: &Path, f: &PartialFrf) -> Result<Outcome> {
    lmsss::io::write_partial_frf_csv(fs::File::create(path)?, f)?;
    let failed = f.failures();
    if failed.is_empty() {
        return Ok(Outcome::Ok);
    }
    let list: Vec<String> = failed.iter().map(|(hz, why)| format!("  {hz} Hz: {why}")).collect();
    Ok(Outcome::Failed(format!(
        "{} frequencies failed (written as NaN):\n{}",
        failed.len(),
        list.join("\n")
    )))
}

fn lmfbs(cmd: LmfbsCmd) -> Result<Outcome> {
    match cmd {
        LmfbsCmd::Couple { frfs, pairs, retain_unique, out } => {
            let pairing = read_pairing(&pairs)?;
            let frfs = frfs
                .iter()
                .map(|p| read_frf(p, ResponseKind::Accelerance))
                .collect::<Result<Vec<_>>>()?;
            let refs: Vec<&FrfMatrix> = frfs.iter().collect();
            let mut part = lmfbs_couple_lenient(&refs, &pairing, Execution::default())?;
            if retain_unique {
                part = retain_unique_partial(&part, &pairing)?;
            }
            write_partial(&out, &part)
        }
        LmfbsCmd::Decouple { assembly, remove, pairs, keep, out } => {
            let ab = read_frf(&assembly, ResponseKind::Accelerance)?;
            let a = read_frf(&remove, ResponseKind::Accelerance)?;
            let part = lmfbs_decouple_lenient(
                &ab,
                &a,
                &read_pairing(&pairs)?,
                &read_labels(&keep)?,
                Execution::default(),
            )?;
            write_partial(&out, &part)
        }
    }
}

fn stiffness(a: StiffnessArgs) -> Result<Outcome> {
    let h = read_frf(&a.input, ResponseKind::Accelerance)?;
    write_frf(&a.out, &dynamic_stiffness(&h)?)?;
    Ok(Outcome::Ok)
}

fn compare(a: CompareArgs) -> Result<Outcome> {
    let x = read_frf(&a.a, ResponseKind::Accelerance)?;
    let y = read_frf(&a.b, ResponseKind::Accelerance)?;
    let r = compare_frf(&x, &y, a.tol)?;
    if let Some(p) = &a.report {
        write_json(p, &r)?;
    }
    let line = format!(
        "max relative error {:.3e} at {} Hz ({} / {}), tolerance {:.3e}",
        r.max_rel_err, r.argmax_freq_hz, r.argmax_out, r.argmax_in, r.tolerance
    );
    if r.pass {
        println!("PASS {line}");
        Ok(Outcome::Ok)
    } else {
        Ok(Outcome::Failed(format!("FAIL {line}")))
    }
}

fn bench(a: BenchArgs) -> Result<Outcome> {
    let report = bench_inversions(&a.njs, a.trials)?;
    for e in &report.entries {
        println!(
            "n_J = {:3}: LM-SSS {:.0} ns, classical {:.0} ns (median), ratio {:.2}",
            e.n_j, e.lmsss_median_ns, e.classical_median_ns, e.ratio
        );
    }
    write_json(&a.report, &report)?;
    Ok(Outcome::Ok)
}

#[cfg(test)]
mod tests {
    use super::*;
    use lmsss::example::build_example;

    #[test]
    fn interface_follows_pairing_order() {
        let ex = build_example(&ExampleConfig::default()).unwrap();
        let b = build_model(&ex.b, OutputKind::Displacement).unwrap();
        let rev = InterfacePairing {
            pairs: ex.pairing.pairs.iter().rev().cloned().collect(),
        };
        let got = interface_of(&b, &rev);
        assert_eq!(got, vec![rev.pairs[0].b.clone(), rev.pairs[1].b.clone()]);
    }

    #[test]
    fn form_none_leaves_the_model() {
        let ex = build_example(&ExampleConfig::default()).unwrap();
        let a = build_model(&ex.a, OutputKind::Displacement).unwrap();
        assert!(apply_form(&a, &[], Form::None).unwrap().is_none());
    }

    #[test]
    fn minimal_without_a_form_is_rejected() {
        let a = CoupleArgs {
            models: vec![],
            pairs: "p.json".into(),
            variant: Kind::Accel,
            form: Form::None,
            minimal: true,
            retain_unique: false,
            out: "c.json".into(),
        };
        assert!(matches!(couple(a), Err(Error::Precondition(_))));
    }
}
