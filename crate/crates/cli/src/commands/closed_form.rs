use gfol_core::flow::{comparison_rk4, fmt12};
use gfol_core::{closed_form_mu, comparison_closed_form, scalar_case_i, FlowError, ScalarOdeSpec};

use crate::error::CliError;
use crate::manifest::RunManifest;
use crate::Status;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Initial eigenvalues (comma separated).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    mu0: Vec<f64>,
    /// Target constant Φ (`--p` is accepted for the p-Sasakian case Φ = p).
    #[arg(long, alias = "p")]
    phi: Option<f64>,
    /// Comparison constant α.
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// Evaluation times (comma separated).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    t: Vec<f64>,
    /// Ψ₁ of the scalar model μ' = 4μ(μ + Ψ₁) - Ψ₂.
    #[arg(long, allow_hyphen_values = true)]
    psi1: Option<f64>,
    /// Ψ₂ of the scalar model.
    #[arg(long)]
    psi2: Option<f64>,
    /// Print the stationary points μ± of the scalar model.
    #[arg(long)]
    stationary: bool,
    /// RK4 step for the integrated columns.
    #[arg(long, default_value_t = 1e-4)]
    dt: f64,
    /// CSV on stdout instead of a table.
    #[arg(long)]
    csv: bool,
}

struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<f64>>,
}

pub fn run(args: &Args, manifest: &mut RunManifest) -> Result<Status, CliError> {
    manifest.config = serde_json::json!({
        "mu0": args.mu0, "phi": args.phi, "alpha": args.alpha, "t": args.t,
        "psi1": args.psi1, "psi2": args.psi2, "stationary": args.stationary, "dt": args.dt,
    });
    let table = if args.psi1.is_some() || args.psi2.is_some() {
        scalar(args)?
    } else {
        let phi = args
            .phi
            .ok_or_else(|| CliError::Usage("--phi (or --p) is required".into()))?;
        require_grid(args)?;
        match args.alpha {
            Some(alpha) => comparison(args, phi, alpha)?,
            None => logistic(args, phi)?,
        }
    };
    print(&table, args.csv)?;
    Ok(Status::Ok)
}

fn input(e: FlowError) -> CliError {
    CliError::Input(e.to_string())
}

fn require_grid(args: &Args) -> Result<(), CliError> {
    if args.mu0.is_empty() || args.t.is_empty() {
        return Err(CliError::Usage("--mu0 and --t are required".into()));
    }
    Ok(())
}

fn logistic(args: &Args, phi: f64) -> Result<Table, CliError> {
    let mut rows = Vec::new();
    for &mu0 in &args.mu0 {
        for &t in &args.t {
            rows.push(vec![mu0, t, closed_form_mu(mu0, phi, t).map_err(input)?]);
        }
    }
    Ok(Table {
        header: vec!["mu0", "t", "mu"],
        rows,
    })
}

fn comparison(args: &Args, phi: f64, alpha: f64) -> Result<Table, CliError> {
    let mut rows = Vec::new();
    for &mu0 in &args.mu0 {
        for &t in &args.t {
            let closed = comparison_closed_form(mu0, alpha, phi, t).map_err(input)?;
            let rk4 = comparison_rk4(mu0, alpha, phi, t, args.dt)
                .map_err(input)?
                .last()
                .map_or(mu0, |p| p.1);
            rows.push(vec![mu0, t, closed, rk4]);
        }
    }
    Ok(Table {
        header: vec!["mu0", "t", "closed_form", "rk4"],
        rows,
    })
}

fn scalar(args: &Args) -> Result<Table, CliError> {
    let spec = |mu0| ScalarOdeSpec {
        psi1: args.psi1.unwrap_or(0.0),
        psi2: args.psi2.unwrap_or(0.0),
        alpha: args.alpha.unwrap_or(0.0),
        mu0,
    };
    if args.stationary {
        let (plus, minus) = spec(0.0).stationary();
        return Ok(Table {
            header: vec!["mu_plus", "mu_minus"],
            rows: vec![vec![plus, minus]],
        });
    }
    require_grid(args)?;
    let mut rows = Vec::new();
    for &mu0 in &args.mu0 {
        for &t in &args.t {
            let res = scalar_case_i(&spec(mu0), t, args.dt).map_err(input)?;
            let end = res.trajectory.last().map_or(mu0, |p| p.1);
            rows.push(vec![mu0, t, end, res.mu_plus, res.distance_to_plus]);
        }
    }
    Ok(Table {
        header: vec!["mu0", "t", "mu", "mu_plus", "distance_to_plus"],
        rows,
    })
}

fn print(table: &Table, csv: bool) -> Result<(), CliError> {
    let cells: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| r.iter().map(|v| fmt12(*v)).collect())
        .collect();
    if csv {
        let mut w = csv::Writer::from_writer(std::io::stdout().lock());
        let io = |e: csv::Error| CliError::io("<stdout>", std::io::Error::other(e));
        w.write_record(&table.header).map_err(io)?;
        for row in &cells {
            w.write_record(row).map_err(io)?;
        }
        w.flush().map_err(|e| CliError::io("<stdout>", e))?;
        return Ok(());
    }
    let widths: Vec<usize> = (0..table.header.len())
        .map(|c| {
            cells
                .iter()
                .map(|r| r[c].len())
                .chain([table.header[c].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |row: Vec<&str>| {
        row.iter()
            .zip(&widths)
            .map(|(s, w)| format!("{s:>w$}"))
            .collect::<Vec<_>>()
            .join("  ")
    };
    println!("{}", line(table.header.clone()));
    for row in &cells {
        println!("{}", line(row.iter().map(String::as_str).collect()));
    }
    Ok(())
}
