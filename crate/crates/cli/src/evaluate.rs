//! `eval`, `overlap` and `score`: verification reports over submission files.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use stepsearch_core::history::write_json_atomic;
use stepsearch_eval::io::{format_scores, read_embeddings, read_manifest, score_set, write_det, ManifestRecord};
use stepsearch_eval::{
    claim_score, evaluate, misclassification_overlap, misclassified, parse_submission, stratified_eer, Embedding,
    GroupBy, Label, MetricsReport, Normalization, OverlapReport, ProbeId, ReferenceGallery, StratifiedEer,
};

fn load_manifest(path: &Path) -> Result<Vec<ManifestRecord>> {
    let f = File::open(path).with_context(|| format!("cannot open manifest {}", path.display()))?;
    read_manifest(f).with_context(|| format!("invalid manifest {}", path.display()))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("cannot read {}", path.display()))
}

#[derive(Serialize)]
struct EvalReport<'a> {
    metrics: &'a MetricsReport,
    stratified: BTreeMap<&'static str, &'a StratifiedEer>,
}

pub struct EvalArgs {
    pub scores: PathBuf,
    pub threshold: PathBuf,
    pub manifest: PathBuf,
    pub count: Option<usize>,
    pub output: Option<PathBuf>,
    pub json: bool,
}

/// Rows in leaderboard order: EER, FMR100, ACC, BACC, FNMR, FMR.
fn metrics_table(m: &MetricsReport) -> String {
    let mut s = format!("{:>8} {:>8} {:>8} {:>8} {:>8} {:>8}\n", "EER", "FMR100", "ACC", "BACC", "FNMR", "FMR");
    s += &format!(
        "{:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>8.2}\n",
        m.eer, m.fmr100, m.acc, m.bacc, m.fnmr, m.fmr
    );
    s += &format!(
        "threshold {} ({} genuine, {} impostor); EER threshold {:.6}\n",
        m.threshold, m.genuine, m.impostor, m.eer_threshold
    );
    if m.fmr100_low_resolution {
        s += "note: fewer than 100 impostor claims, so FMR100 cannot resolve a 1% false match rate\n";
    }
    s
}

pub fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let manifest = load_manifest(&a.manifest)?;
    let sub = parse_submission(&read_bytes(&a.scores)?, &read_bytes(&a.threshold)?, a.count.unwrap_or(manifest.len()))?;
    let set = score_set(&manifest, &sub.scores)?;
    let metrics = evaluate(&set, sub.threshold)?;
    let by_condition = stratified_eer(&set, GroupBy::Condition)?;
    let by_footwear = stratified_eer(&set, GroupBy::Footwear)?;
    let by_speed = stratified_eer(&set, GroupBy::Speed)?;
    let report = EvalReport {
        metrics: &metrics,
        stratified: BTreeMap::from([
            ("condition", &by_condition),
            ("footwear", &by_footwear),
            ("speed", &by_speed),
        ]),
    };

    if let Some(dir) = &a.output {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        write_json_atomic(&dir.join("report.json"), &report)?;
        write_det(BufWriter::new(File::create(dir.join("det.csv"))?), &metrics.det_points)?;
        let wrong: Vec<String> = misclassified(&set, sub.threshold).into_iter().map(|p| p.0).collect();
        fs::write(dir.join("misclassified.txt"), lines(&wrong))?;
    }
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{}", metrics_table(&metrics));
        for (name, st) in [("footwear", &by_footwear), ("speed", &by_speed)] {
            let cells: Vec<String> = st.strata.iter().map(|(k, v)| format!("{k} {:.2}", v.eer)).collect();
            println!("EER by {name}: {}", cells.join(", "));
        }
    }
    Ok(())
}

fn lines(items: &[String]) -> String {
    items.iter().map(|s| format!("{s}\n")).collect()
}

/// One probe id per line; blank lines are ignored.
fn read_decisions(path: &Path) -> Result<BTreeSet<ProbeId>> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(ProbeId::from).collect())
}

pub fn cmd_overlap(files: &[PathBuf], manifest: Option<&Path>, output: Option<&Path>, json: bool) -> Result<()> {
    if files.len() < 2 {
        bail!("overlap needs at least two decision files");
    }
    let sets = files.iter().map(|f| read_decisions(f)).collect::<Result<Vec<_>>>()?;
    let labels: Option<BTreeMap<ProbeId, Label>> = match manifest {
        Some(m) => Some(load_manifest(m)?.into_iter().map(|r| (r.probe_id, r.label)).collect()),
        None => None,
    };
    let report = misclassification_overlap(&sets, labels.as_ref());
    if let Some(p) = output {
        write_json_atomic(p, &report)?;
    }
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{}", overlap_table(files, &report));
    }
    Ok(())
}

fn overlap_table(files: &[PathBuf], r: &OverlapReport) -> String {
    let mut s = String::new();
    for (k, (f, n)) in files.iter().zip(&r.sizes).enumerate() {
        s += &format!("[{k}] {}: {n} misclassified\n", f.display());
    }
    for p in &r.pairwise {
        s += &format!("[{}] & [{}]: {}\n", p.a, p.b, p.count);
    }
    s += &format!("all: {}", r.common.len());
    if r.common_unlabeled < r.common.len() {
        s += &format!(
            " ({} false matches, {} false non-matches)",
            r.common_false_matches, r.common_false_non_matches
        );
    }
    s.push('\n');
    s
}

pub struct ScoreArgs {
    pub gallery: PathBuf,
    pub probes: PathBuf,
    pub manifest: PathBuf,
    pub normalization: Normalization,
    pub output: PathBuf,
}

fn load_embeddings(path: &Path) -> Result<Vec<Embedding>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    read_embeddings(f).with_context(|| format!("invalid embeddings in {}", path.display()))
}

/// Scores every manifest claim and writes a submission scores file in
/// manifest order.
pub fn cmd_score(a: &ScoreArgs) -> Result<()> {
    let gallery = ReferenceGallery::new(load_embeddings(&a.gallery)?)?;
    let mut probes: BTreeMap<String, Embedding> = BTreeMap::new();
    for e in load_embeddings(&a.probes)? {
        let id = e.id.0.clone();
        if probes.insert(id.clone(), e).is_some() {
            bail!("probe {id} appears twice in {}", a.probes.display());
        }
    }
    let manifest = load_manifest(&a.manifest)?;
    let mut scores = Vec::with_capacity(manifest.len());
    for (k, m) in manifest.iter().enumerate() {
        let probe = probes.get(&m.probe_id.0).with_context(|| format!("manifest row {}: no embedding for probe {}", k + 1, m.probe_id))?;
        let s = claim_score(probe, &gallery, &m.claimed_id, a.normalization)
            .with_context(|| format!("manifest row {}: probe {}", k + 1, m.probe_id))?;
        scores.push(s);
    }
    fs::write(&a.output, format_scores(&scores)).with_context(|| format!("cannot write {}", a.output.display()))?;
    println!("wrote {} scores to {}", scores.len(), a.output.display());
    Ok(())
}
