use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde_json::json;

use evmv_core::encode::{
    check_invariance, encode_view, invariant_spec_set, parse_spec_selector, ConversionSpec,
    DenseMap, EncoderConfig,
};
use evmv_core::event::{EventStream, ViewAxis};
use evmv_core::fusion::{
    attention_forward, gradient_check, strategy_by_name, AttentionHead, FusionInputs, ToyBranch,
    WeightedSumLoss,
};
use evmv_core::io;
use evmv_core::synth::synthetic_stream;
use evmv_core::warp::{apply_warp, rescale_duration, sample_plan};

use crate::{CliError, CliResult, EXIT_DOMAIN};

fn parse_view(s: &str) -> Result<ViewAxis, CliError> {
    ViewAxis::parse(s)
        .ok_or_else(|| CliError::usage(format!("unknown view `{s}`; use th, tw, or hw")))
}

fn parse_specs(s: &str) -> Result<Vec<ConversionSpec>, CliError> {
    parse_spec_selector(s).map_err(|e| CliError::usage(e.to_string()))
}

fn read_stream(path: &Path, csv_dims: Option<(u16, u16)>) -> Result<EventStream, CliError> {
    Ok(io::read_events_auto(path, csv_dims)?)
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

pub struct ConvertArgs {
    pub paths: Vec<PathBuf>,
    pub view: String,
    pub specs: String,
    pub t_bins: u32,
    pub resize: Option<String>,
    pub pgm: Option<PathBuf>,
    pub csv_dims: Option<(u16, u16)>,
    pub threads: usize,
    pub json: bool,
}

fn parse_resize(s: &str) -> Result<(usize, usize), CliError> {
    let (rows, cols) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| CliError::usage(format!("--resize wants ROWSxCOLS, got `{s}`")))?;
    let parse = |v: &str| -> Result<usize, CliError> {
        v.parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::usage(format!("bad resize dimension `{v}`")))
    };
    Ok((parse(rows)?, parse(cols)?))
}

struct ConvertOutcome {
    input: PathBuf,
    output: PathBuf,
    channels: usize,
    rows: usize,
    cols: usize,
    events: usize,
}

fn convert_one(
    input: &Path,
    output: &Path,
    view: ViewAxis,
    specs: &[ConversionSpec],
    t_bins: u32,
    resize: Option<(usize, usize)>,
    csv_dims: Option<(u16, u16)>,
) -> Result<(ConvertOutcome, DenseMap), CliError> {
    let stream = read_stream(input, csv_dims)?;
    let config = EncoderConfig::new(view, specs.to_vec(), t_bins)?;
    let mut map = encode_view(&stream, &config)?;
    if let Some((rows, cols)) = resize {
        map = io::resize_nearest(&map, rows, cols)?;
    }
    io::write_map(&map, output)?;
    Ok((
        ConvertOutcome {
            input: input.to_path_buf(),
            output: output.to_path_buf(),
            channels: map.channels(),
            rows: map.rows(),
            cols: map.cols(),
            events: stream.len(),
        },
        map,
    ))
}

pub fn convert(args: ConvertArgs) -> CliResult {
    let view = parse_view(&args.view)?;
    let specs = parse_specs(&args.specs)?;
    let resize = args.resize.as_deref().map(parse_resize).transpose()?;
    if args.t_bins == 0 {
        return Err(CliError::usage("--t-bins must be positive"));
    }

    let (inputs, output) = args.paths.split_at(args.paths.len() - 1);
    let output = &output[0];

    let mut outcomes: Vec<ConvertOutcome> = Vec::with_capacity(inputs.len());
    if inputs.len() == 1 {
        let (outcome, map) = convert_one(
            &inputs[0],
            output,
            view,
            &specs,
            args.t_bins,
            resize,
            args.csv_dims,
        )?;
        if let Some(pgm) = &args.pgm {
            io::export_map_image(&map, 0, pgm)?;
        }
        outcomes.push(outcome);
    } else {
        if args.pgm.is_some() {
            return Err(CliError::usage("--pgm needs a single input"));
        }
        std::fs::create_dir_all(output).map_err(evmv_core::Error::from)?;
        let jobs: Vec<(usize, &PathBuf, PathBuf)> = inputs
            .iter()
            .enumerate()
            .map(|(i, input)| {
                let stem = input
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| format!("map{i}"));
                (i, input, output.join(format!("{stem}.dmp")))
            })
            .collect();

        let workers = args.threads.min(jobs.len()).max(1);
        let mut slots: Vec<Option<Result<ConvertOutcome, CliError>>> =
            (0..jobs.len()).map(|_| None).collect();
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for chunk in jobs.chunks(jobs.len().div_ceil(workers)) {
                let specs = &specs;
                let handle = scope.spawn(move || {
                    chunk
                        .iter()
                        .map(|(i, input, out)| {
                            (
                                *i,
                                convert_one(
                                    input,
                                    out,
                                    view,
                                    specs,
                                    args.t_bins,
                                    resize,
                                    args.csv_dims,
                                )
                                .map(|(outcome, _)| outcome),
                            )
                        })
                        .collect::<Vec<_>>()
                });
                handles.push(handle);
            }
            for handle in handles {
                for (i, res) in handle.join().expect("conversion worker panicked") {
                    slots[i] = Some(res);
                }
            }
        });
        for slot in slots {
            outcomes.push(slot.expect("job not executed")?);
        }
    }

    if args.json {
        let entries: Vec<_> = outcomes
            .iter()
            .map(|o| {
                json!({
                    "input": o.input,
                    "output": o.output,
                    "events": o.events,
                    "channels": o.channels,
                    "rows": o.rows,
                    "cols": o.cols,
                })
            })
            .collect();
        println!("{}", json!({ "command": "convert", "maps": entries }));
    } else {
        for o in &outcomes {
            println!(
                "{} -> {}: {} events to {}x{}x{} map",
                o.input.display(),
                o.output.display(),
                o.events,
                o.channels,
                o.rows,
                o.cols
            );
        }
    }
    Ok(())
}

pub struct AugmentArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    pub l: u32,
    pub mag_range: String,
    pub preserve_duration: bool,
    pub csv_dims: Option<(u16, u16)>,
    pub seed: u64,
    pub json: bool,
}

fn parse_mag_range(s: &str) -> Result<(f64, f64), CliError> {
    let err = || CliError::usage(format!("--mag-range wants `a,b`, got `{s}`"));
    let (a, b) = s.split_once(',').ok_or_else(err)?;
    let a: f64 = a.trim().parse().map_err(|_| err())?;
    let b: f64 = b.trim().parse().map_err(|_| err())?;
    if !a.is_finite() || !b.is_finite() || a > b {
        return Err(err());
    }
    Ok((a, b))
}

pub fn augment(args: AugmentArgs) -> CliResult {
    let range = parse_mag_range(&args.mag_range)?;
    if args.l == 0 {
        return Err(CliError::usage("--l must be positive"));
    }
    let stream = read_stream(&args.input, args.csv_dims)?;
    let plan = sample_plan(&stream, args.l, range, args.seed)?;
    let mut warped = apply_warp(&stream, &plan)?;
    if args.preserve_duration {
        if let Some((t0, t1)) = stream.time_span() {
            warped = rescale_duration(&warped, t1 - t0);
        }
    }
    if is_csv(&args.output) {
        io::write_events_csv(&warped, &args.output)?;
    } else {
        io::write_events_binary(&warped, &args.output)?;
    }

    if args.json {
        let intervals: Vec<_> = plan.intervals.iter().map(|&(a, b)| json!([a, b])).collect();
        let warps: Vec<_> = plan
            .specs
            .iter()
            .map(|s| json!({ "family": s.family.name(), "magnitude": s.magnitude }))
            .collect();
        println!(
            "{}",
            json!({
                "command": "augment",
                "seed": plan.rng_seed,
                "intervals": intervals,
                "warps": warps,
                "events": warped.len(),
                "output": args.output,
            })
        );
    } else {
        print!("{plan}");
        println!("wrote {} events to {}", warped.len(), args.output.display());
    }
    Ok(())
}

pub struct VerifyArgs {
    pub input: PathBuf,
    pub view: String,
    pub deltas: String,
    pub specs: String,
    pub t_bins: u32,
    pub csv_dims: Option<(u16, u16)>,
    pub json: bool,
}

fn parse_deltas(s: &str) -> Result<Vec<i64>, CliError> {
    let parts: Vec<&str> = s
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .collect();
    if parts.is_empty() {
        return Err(CliError::usage("--deltas needs at least one shift"));
    }
    parts
        .iter()
        .map(|p| {
            p.parse::<i64>()
                .map_err(|_| CliError::usage(format!("bad delta `{p}`")))
        })
        .collect()
}

pub fn verify_invariance(args: VerifyArgs) -> CliResult {
    let view = parse_view(&args.view)?;
    if view == ViewAxis::HeightWidth {
        return Err(CliError::usage(
            "shift verification runs on the spatial views th and tw",
        ));
    }
    let deltas = parse_deltas(&args.deltas)?;
    let specs = parse_specs(&args.specs)?;
    let stream = read_stream(&args.input, args.csv_dims)?;
    let claimed_invariant = invariant_spec_set();

    struct Row {
        spec: String,
        claimed: bool,
        observed: bool,
        deviation: f64,
        evaluated: usize,
        ok: bool,
    }

    let mut rows = Vec::with_capacity(specs.len());
    for spec in &specs {
        let report = check_invariance(&stream, view, spec, &deltas, args.t_bins)?;
        let claimed = claimed_invariant.contains(spec);
        // A claimed-variant spec must exhibit a witness on this input.
        let ok = report.deltas_evaluated > 0 && claimed == report.invariant;
        rows.push(Row {
            spec: spec.to_string(),
            claimed,
            observed: report.invariant,
            deviation: report.max_abs_deviation,
            evaluated: report.deltas_evaluated,
            ok,
        });
    }

    let all_skipped = rows.iter().all(|r| r.evaluated == 0);
    let all_ok = rows.iter().all(|r| r.ok);

    if args.json {
        let entries: Vec<_> = rows
            .iter()
            .map(|r| {
                json!({
                    "spec": r.spec,
                    "claimed_invariant": r.claimed,
                    "observed_invariant": r.observed,
                    "max_abs_deviation": r.deviation,
                    "deltas_evaluated": r.evaluated,
                    "ok": r.ok,
                })
            })
            .collect();
        println!(
            "{}",
            json!({
                "command": "verify-invariance",
                "view": view.name(),
                "rows": entries,
                "ok": all_ok && !all_skipped,
            })
        );
    } else {
        println!(
            "{:<24} {:<10} {:<10} {:>14} {:>7}  status",
            "spec", "claimed", "observed", "max-deviation", "deltas"
        );
        for r in &rows {
            let label = |b: bool| if b { "invariant" } else { "variant" };
            println!(
                "{:<24} {:<10} {:<10} {:>14.6e} {:>7}  {}",
                r.spec,
                label(r.claimed),
                label(r.observed),
                r.deviation,
                r.evaluated,
                if r.ok { "ok" } else { "MISMATCH" }
            );
        }
    }

    if all_skipped {
        return Err(CliError {
            code: EXIT_DOMAIN,
            msg: format!(
                "every delta was out of bounds for this stream; try shifts smaller than {:?}",
                deltas
            ),
        });
    }
    if !all_ok {
        return Err(CliError::domain(
            "at least one spec did not behave as claimed (see table)",
        ));
    }
    Ok(())
}

pub struct BenchArgs {
    pub input: Option<PathBuf>,
    pub synthetic: Option<usize>,
    pub specs: String,
    pub view: String,
    pub t_bins: u32,
    pub repeat: usize,
    pub width: u16,
    pub height: u16,
    pub seed: u64,
    pub json: bool,
}

pub fn bench(args: BenchArgs) -> CliResult {
    let view = parse_view(&args.view)?;
    let specs = parse_specs(&args.specs)?;
    if args.repeat == 0 {
        return Err(CliError::usage("--repeat must be positive"));
    }
    let (stream, source) = match (&args.input, args.synthetic) {
        (Some(path), _) => (read_stream(path, None)?, path.display().to_string()),
        (None, n) => {
            let n = n.unwrap_or(1_000_000);
            (
                synthetic_stream(n, args.width, args.height, 1.0, args.seed),
                format!("synthetic({n})"),
            )
        }
    };
    let config = EncoderConfig::new(view, specs, args.t_bins)?;

    // One untimed warm-up pass, then the measured repeats.
    let map = encode_view(&stream, &config)?;
    let mut times: Vec<Duration> = Vec::with_capacity(args.repeat);
    for _ in 0..args.repeat {
        let t0 = Instant::now();
        let m = encode_view(&stream, &config)?;
        times.push(t0.elapsed());
        std::hint::black_box(m);
    }
    times.sort();
    let median = times[times.len() / 2];
    let p95 = (times.len() > 1).then(|| {
        let idx = ((times.len() as f64) * 0.95).ceil() as usize - 1;
        times[idx.min(times.len() - 1)]
    });
    let throughput = stream.len() as f64 / median.as_secs_f64().max(1e-12);

    if args.json {
        println!(
            "{}",
            json!({
                "command": "bench",
                "source": source,
                "events": stream.len(),
                "specs": args.specs,
                "view": view.name(),
                "t_bins": args.t_bins,
                "repeat": args.repeat,
                "channels": map.channels(),
                "median_ms": median.as_secs_f64() * 1e3,
                "p95_ms": p95.map(|d| d.as_secs_f64() * 1e3),
                "events_per_second": throughput,
            })
        );
    } else {
        println!(
            "{}: {} events -> {}x{}x{} map (specs={}, view={}, t-bins={})",
            source,
            stream.len(),
            map.channels(),
            map.rows(),
            map.cols(),
            args.specs,
            view.name(),
            args.t_bins
        );
        println!(
            "median {:.3} ms over {} runs",
            median.as_secs_f64() * 1e3,
            args.repeat
        );
        if let Some(p95) = p95 {
            println!("p95    {:.3} ms", p95.as_secs_f64() * 1e3);
        }
        println!("throughput {:.2} M events/s", throughput / 1e6);
    }
    Ok(())
}

pub struct FuseDemoArgs {
    pub dim: usize,
    pub classes: usize,
    pub heads: usize,
    pub strategy: String,
    pub seed: u64,
    pub json: bool,
}

fn fmt_vec(values: &[f64]) -> String {
    let inner: Vec<String> = values.iter().map(|v| format!("{v:.6}")).collect();
    format!("[{}]", inner.join(", "))
}

pub fn fuse_demo(args: FuseDemoArgs) -> CliResult {
    if args.dim == 0 || args.heads == 0 || !args.dim.is_multiple_of(args.heads) {
        return Err(CliError::usage(
            "--dim must be positive and divisible by --heads",
        ));
    }
    if args.classes < 2 {
        return Err(CliError::usage("--classes must be at least 2"));
    }

    let t_bins = 32;
    let stream = synthetic_stream(2_000, 64, 48, 25.0, args.seed);
    let config_th = EncoderConfig::compact(ViewAxis::TimeHeight, t_bins)?;
    let config_tw = EncoderConfig::compact(ViewAxis::TimeWidth, t_bins)?;
    let branch_th = ToyBranch::random(
        ViewAxis::TimeHeight,
        2,
        args.dim,
        args.classes,
        args.seed ^ 1,
    )?;
    let branch_tw = ToyBranch::random(
        ViewAxis::TimeWidth,
        2,
        args.dim,
        args.classes,
        args.seed ^ 2,
    )?;
    let head = AttentionHead::random(args.dim, args.classes, args.heads, args.seed ^ 3)?;

    let map_th = encode_view(&stream, &config_th)?;
    let map_tw = encode_view(&stream, &config_tw)?;
    let (s_th, l_th) = branch_th.forward(&map_th)?;
    let (s_tw, l_tw) = branch_tw.forward(&map_tw)?;
    let weights = attention_forward(&head, &s_th, &s_tw)?;

    let strategy = strategy_by_name(&args.strategy, args.classes, Some(head.clone()))
        .map_err(|e| CliError::usage(e.to_string()))?;
    let fused = strategy.fuse(&FusionInputs {
        l_th: &l_th,
        l_tw: &l_tw,
        s_th: Some(&s_th),
        s_tw: Some(&s_tw),
    })?;

    let loss = WeightedSumLoss(vec![1.0; args.classes]);
    let report = gradient_check(&head, &s_th, &s_tw, &l_th, &l_tw, &loss)?;

    if args.json {
        println!(
            "{}",
            json!({
                "command": "fuse-demo",
                "dim": args.dim,
                "classes": args.classes,
                "heads": args.heads,
                "seed": args.seed,
                "strategy": strategy.name(),
                "logits_th": l_th.values,
                "logits_tw": l_tw.values,
                "weights_th": weights.w_th,
                "weights_tw": weights.w_tw,
                "fused": fused.values,
                "grad_max_rel_error": report.max_rel_error,
                "grad_params_checked": report.params_checked,
            })
        );
    } else {
        println!(
            "fusion demo: dim={} classes={} heads={} seed={} strategy={}",
            args.dim,
            args.classes,
            args.heads,
            args.seed,
            strategy.name()
        );
        println!("logits  th: {}", fmt_vec(&l_th.values));
        println!("logits  tw: {}", fmt_vec(&l_tw.values));
        println!("weights th: {}", fmt_vec(&weights.w_th));
        println!("weights tw: {}", fmt_vec(&weights.w_tw));
        println!("fused     : {}", fmt_vec(&fused.values));
        println!(
            "gradient check: max relative error {:.3e} over {} parameters",
            report.max_rel_error, report.params_checked
        );
    }
    Ok(())
}
