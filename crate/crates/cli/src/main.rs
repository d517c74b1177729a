use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gradsim_core::metrics::{aggregate, write_aggregate_csv, write_runs_csv};
use gradsim_core::network::NodeSummary;
use gradsim_core::policies::DecisionRecord;
use gradsim_core::scenario::{expand_cells, param_label, run_cells, run_replication_with, Axis};
use gradsim_core::{report, Error, Result, ScenarioConfig};

#[derive(Parser, Debug)]
#[command(name = "gradsim", version, about = "Gradient-broadcast routing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run all replications of one configuration.
    Run(Common),
    /// Run the cross product of one or more parameter axes.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// `key=v1,v2,...`; repeat for more axes.
        #[arg(long = "axis", required = true)]
        axes: Vec<String>,
    },
    /// Print a table and write long-format CSV from an aggregate file.
    Report {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write `node,x,y,Q,N_i,delta` after one replication.
    DumpTopology {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        run: u32,
    },
    /// Write the event and decision traces of one replication.
    DumpTrace {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        run: u32,
    },
}

#[derive(Args, Debug, Clone)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    /// `key=value` override; `section.key` or a unique bare key.
    #[arg(long = "set")]
    overrides: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of replications (overrides scenario.replications).
    #[arg(long)]
    seeds: Option<u32>,
    /// Worker threads for replications; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Also write per-run event and decision traces.
    #[arg(long)]
    trace: bool,
}

impl Common {
    fn load(&self) -> Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(p) => ScenarioConfig::from_file(p)?,
            None => ScenarioConfig::default(),
        };
        cfg.apply_overrides(&self.overrides)?;
        if let Some(n) = self.seeds {
            cfg.apply_override("scenario.replications", &n.to_string())?;
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run(common) => {
            let cfg = common.load()?;
            let label = param_label(&cfg, &common.overrides)?;
            execute(&common, expand_cells(&cfg, &label, &[])?)
        }
        Command::Sweep { common, axes } => {
            let cfg = common.load()?;
            let axes = axes.iter().map(|a| Axis::parse(a)).collect::<Result<Vec<_>>>()?;
            let label = param_label(&cfg, &common.overrides)?;
            execute(&common, expand_cells(&cfg, &label, &axes)?)
        }
        Command::Report { input, out } => {
            let file = File::open(&input)?;
            let rows = report::read_rows(file)?;
            print!("{}", report::render_table(&rows));
            if let Some(dir) = out {
                fs::create_dir_all(&dir)?;
                report::write_long(create(&dir.join("long.csv"))?, &rows)?;
            }
            Ok(())
        }
        Command::DumpTopology { common, run } => {
            let cfg = common.load()?;
            let output = run_replication_with(&cfg, run, "", false)?;
            let mut w = sink(common.out.as_deref(), "topology.csv")?;
            write_topology(&mut w, &output.nodes)?;
            Ok(())
        }
        Command::DumpTrace { common, run } => {
            let cfg = common.load()?;
            let output = run_replication_with(&cfg, run, "", true)?;
            let events = output.events.expect("trace requested");
            match common.out.as_deref() {
                Some(dir) => {
                    fs::create_dir_all(dir)?;
                    events.write_to(create(&dir.join("events.csv"))?)?;
                    write_decisions(create(&dir.join("decisions.csv"))?, output.decisions.as_deref().unwrap_or(&[]))?;
                }
                None => events.write_to(io::stdout().lock())?,
            }
            Ok(())
        }
    }
}

fn execute(common: &Common, cells: Vec<gradsim_core::Cell>) -> Result<()> {
    let runs = run_cells(&cells, common.jobs)?;
    let cells_agg = aggregate(&runs);
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    write_runs_csv(create(&dir.join("runs.csv"))?, &runs)?;
    write_aggregate_csv(create(&dir.join("aggregate.csv"))?, &cells_agg)?;
    if common.trace {
        let tdir = dir.join("traces");
        fs::create_dir_all(&tdir)?;
        for (ci, cell) in cells.iter().enumerate() {
            for r in 0..cell.config.scenario.replications {
                let out = run_replication_with(&cell.config, r, &cell.param, true)?;
                let stem = format!("cell{ci}_run{r}");
                out.events
                    .expect("trace requested")
                    .write_to(create(&tdir.join(format!("{stem}_events.csv")))?)?;
                write_decisions(
                    create(&tdir.join(format!("{stem}_decisions.csv")))?,
                    out.decisions.as_deref().unwrap_or(&[]),
                )?;
            }
        }
    }
    let rows = report::read_rows(File::open(dir.join("aggregate.csv"))?)?;
    print!("{}", report::render_table(&rows));
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn sink(dir: Option<&Path>, name: &str) -> Result<Box<dyn Write>> {
    match dir {
        Some(d) => {
            fs::create_dir_all(d)?;
            Ok(Box::new(create(&d.join(name))?))
        }
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn write_topology<W: Write>(w: &mut W, nodes: &[NodeSummary]) -> Result<()> {
    writeln!(w, "{}", NodeSummary::HEADER)?;
    for n in nodes {
        writeln!(w, "{}", n.to_csv_line())?;
    }
    w.flush().map_err(Error::from)
}

fn write_decisions<W: Write>(mut w: W, records: &[DecisionRecord]) -> Result<()> {
    writeln!(w, "{}", DecisionRecord::HEADER)?;
    for r in records {
        writeln!(w, "{}", r.to_csv_line())?;
    }
    w.flush().map_err(Error::from)
}
