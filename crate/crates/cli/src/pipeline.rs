//! Staged pipeline over a stage directory. Every stage reads its upstream
//! artifacts from disk and writes its own files into `<dir>/<stage>/`;
//! `manifest.json` records, per stage, a digest of those files, the config
//! digest and the upstream digests it was computed from.

use crate::config::{Builtin, ConfigError, PipelineConfig, Scorer};
use crate::histogram::{histogram, HISTOGRAM_HEADER};
use lacuna_core::anomaly::{AnomalyError, IsolationForest};
use lacuna_core::chem::{parse_smiles, ChemError, Scaffold};
use lacuna_core::completion::{
    check_restoration, compute_target_interval, filter_by_score, interval_from_bounds, neighbor_counts,
    placeholder_scaffolds, rebuild_with_candidates, reference_scaffolds, remove_edge_intersections, square_lacunae,
    CompletionError, CompletionReport, DownsampleRule, LacunaSpec, RepairContext, Restoration, ScoreInterval,
};
use lacuna_core::dataset::{ingest, Dataset, DatasetError, IngestReport, ONIUM_CORPUS};
use lacuna_core::fingerprint::{pairwise_distances, BitFingerprint, FingerprintError, FingerprintParams};
use lacuna_core::fixture::square_library;
use lacuna_core::generator::{
    refine_policy, sample_batch, score_candidates, train_policy, GenerationPolicy, GeneratorError, ScoringFunction,
};
use lacuna_core::mapper::{
    build_cover, build_mapper, detect_features, Cover, MapperError, MapperGraph, SpectralParams,
};
use lacuna_core::persistence::{cumulative_series, PersistenceError};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    Fingerprint,
    Anomaly,
    Ph,
    Mapper,
    Lacuna,
    Train,
    Sample,
    Complete,
    Report,
}

impl Stage {
    /// Topological order.
    pub const ALL: [Stage; 10] = [
        Stage::Ingest,
        Stage::Fingerprint,
        Stage::Anomaly,
        Stage::Ph,
        Stage::Mapper,
        Stage::Lacuna,
        Stage::Train,
        Stage::Sample,
        Stage::Complete,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Fingerprint => "fingerprint",
            Stage::Anomaly => "anomaly",
            Stage::Ph => "ph",
            Stage::Mapper => "mapper",
            Stage::Lacuna => "lacuna",
            Stage::Train => "train",
            Stage::Sample => "sample",
            Stage::Complete => "complete",
            Stage::Report => "report",
        }
    }

    pub fn from_name(name: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|s| s.name() == name)
    }

    pub fn upstream(self) -> &'static [Stage] {
        match self {
            Stage::Ingest => &[],
            Stage::Fingerprint => &[Stage::Ingest],
            Stage::Anomaly | Stage::Ph => &[Stage::Fingerprint],
            Stage::Mapper => &[Stage::Anomaly],
            Stage::Lacuna => &[Stage::Mapper],
            Stage::Train => &[Stage::Lacuna],
            Stage::Sample => &[Stage::Train],
            Stage::Complete => &[Stage::Sample],
            Stage::Report => &[Stage::Complete, Stage::Ph],
        }
    }

    /// `self` and every transitive upstream stage, in topological order.
    pub fn closure(self) -> Vec<Stage> {
        let mut need = BTreeSet::from([self]);
        for s in Stage::ALL.into_iter().rev() {
            if need.contains(&s) {
                need.extend(s.upstream().iter().copied());
            }
        }
        need.into_iter().collect()
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("stage `{stage}` needs the output of `{missing}`; run it first")]
    MissingUpstream { stage: &'static str, missing: &'static str },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("stage directory {0} is locked by another run")]
    Locked(PathBuf),
    #[error("{path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
    #[error("the Mapper graph has no square lacuna; name the target edges in `lacuna.edges`")]
    NoSquare,
    #[error("no Murcko scaffold is shared by the withheld records and the remaining node members")]
    NoScaffolds,
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Fingerprint(#[from] FingerprintError),
    #[error(transparent)]
    Anomaly(#[from] AnomalyError),
    #[error(transparent)]
    Persistence(#[from] PersistenceError),
    #[error(transparent)]
    Mapper(#[from] MapperError),
    #[error(transparent)]
    Completion(#[from] CompletionError),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error(transparent)]
    Chem(#[from] ChemError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn malformed(path: &Path, reason: impl ToString) -> PipelineError {
    PipelineError::Malformed {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Files of one stage, keyed by name.
pub type Files = BTreeMap<String, Vec<u8>>;

/// SHA-256 over the files in name order, each framed as name, NUL, length
/// (u64 little-endian), bytes.
pub fn digest_files(files: &Files) -> String {
    let mut h = Sha256::new();
    for (name, bytes) in files {
        h.update(name.as_bytes());
        h.update([0u8]);
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(bytes);
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub digest: String,
    pub config: String,
    pub upstream: BTreeMap<String, String>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub stages: BTreeMap<String, StageRecord>,
}

/// Held while a run writes into the stage directory.
struct LockGuard(PathBuf);

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("artifact serializes");
    v.push(b'\n');
    v
}

/// Forest, cover and clusterer fixed by the mapper stage; every rebuild
/// reuses them.
#[derive(Debug, Clone)]
pub struct Frame {
    pub forest: IsolationForest,
    pub cover: Cover,
    pub clusterer: SpectralParams,
}

/// One dataset with its lens values and Mapper graph.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub dataset: Dataset,
    pub lens: Vec<f64>,
    pub graph: MapperGraph,
}

impl Snapshot {
    pub fn from_parts(dataset: Dataset, graph: MapperGraph, forest: &IsolationForest) -> Result<Self, PipelineError> {
        let lens = forest
            .batch_scores(&dataset.fingerprints())?
            .into_iter()
            .map(|s| s.0)
            .collect();
        Ok(Snapshot { dataset, lens, graph })
    }
}

/// Target edges, their withheld records and the lens interval the repair aims
/// for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surgery {
    pub edges: Vec<[usize; 2]>,
    /// Lower-interval endpoints.
    pub u_nodes: Vec<usize>,
    /// Upper-interval endpoints.
    pub v_nodes: Vec<usize>,
    pub spec: LacunaSpec,
    /// Snapshot indices of the records that stay.
    pub kept: Vec<usize>,
    pub interval: ScoreInterval,
    pub target: f64,
    /// Restoration of the reduced dataset with nothing added.
    pub post_surgery: Restoration,
}

impl Surgery {
    pub fn nodes(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self.u_nodes.iter().chain(&self.v_nodes).copied().collect();
        set.into_iter().collect()
    }

    pub fn reduced(&self, snap: &Snapshot) -> Dataset {
        snap.dataset.subset(&self.kept)
    }

    pub fn context<'a>(
        &'a self,
        frame: &'a Frame,
        snap: &'a Snapshot,
        reduced: &'a [BitFingerprint],
    ) -> RepairContext<'a, SpectralParams> {
        RepairContext {
            original: &snap.graph,
            spec: &self.spec,
            reduced,
            kept: &self.kept,
            forest: &frame.forest,
            cover: &frame.cover,
            clusterer: &frame.clusterer,
        }
    }
}

/// The first square lacuna's crossing edges.
pub fn default_edges(graph: &MapperGraph) -> Result<Vec<[usize; 2]>, PipelineError> {
    let [u1, u2, v1, v2] = *square_lacunae(graph).first().ok_or(PipelineError::NoSquare)?;
    Ok(vec![[u1, v2], [u2, v1]])
}

/// Removes the member intersections of `edges` and derives the target
/// interval, from the endpoints unless `interval` overrides it.
pub fn perform_surgery(
    frame: &Frame,
    snap: &Snapshot,
    edges: &[[usize; 2]],
    interval: Option<[f64; 2]>,
) -> Result<Surgery, PipelineError> {
    if edges.is_empty() {
        return Err(PipelineError::Invalid("no target edges".into()));
    }
    let g = &snap.graph;
    let mut u_nodes = BTreeSet::new();
    let mut v_nodes = BTreeSet::new();
    for &[a, b] in edges {
        if a >= g.nodes.len() || b >= g.nodes.len() {
            return Err(CompletionError::NoSuchNode(a.max(b)).into());
        }
        let (u, v) = if (g.nodes[a].interval_index, a) <= (g.nodes[b].interval_index, b) {
            (a, b)
        } else {
            (b, a)
        };
        u_nodes.insert(u);
        v_nodes.insert(v);
    }
    let pairs: Vec<(usize, usize)> = edges.iter().map(|&[a, b]| (a, b)).collect();
    let (reduced, kept, spec) = remove_edge_intersections(g, &snap.dataset, &pairs)?;
    let u_nodes: Vec<usize> = u_nodes.into_iter().collect();
    let v_nodes: Vec<usize> = v_nodes.into_iter().collect();
    let (interval, target) = match interval {
        Some([lo, hi]) => interval_from_bounds(lo, hi)?,
        None => compute_target_interval(g, &u_nodes, &v_nodes, &snap.lens)?,
    };
    let reduced_fps = reduced.fingerprints();
    let rebuilt = rebuild_with_candidates(&reduced_fps, &[], &frame.forest, &frame.cover, &frame.clusterer)?;
    let origin: Vec<Option<usize>> = kept.iter().map(|&k| Some(k)).collect();
    let post_surgery = check_restoration(g, &rebuilt, &origin, &spec);
    Ok(Surgery {
        edges: edges.to_vec(),
        u_nodes,
        v_nodes,
        spec,
        kept,
        interval,
        target,
        post_surgery,
    })
}

/// Murcko scaffolds shared by the withheld records and the surviving members
/// of the surgery nodes.
pub fn shared_scaffolds(snap: &Snapshot, surgery: &Surgery) -> Vec<Scaffold> {
    reference_scaffolds(&snap.dataset, &snap.graph, &surgery.nodes(), &surgery.spec.removed)
}

/// Scaffolds given as SMILES, taken as their own cores.
pub fn parse_scaffolds(smiles: &[String]) -> Result<Vec<Scaffold>, PipelineError> {
    Ok(smiles
        .iter()
        .map(|s| Ok(Scaffold::from_core(parse_smiles(s)?)))
        .collect::<Result<Vec<_>, ChemError>>()?)
}

pub fn build_scorer(
    kind: Scorer,
    scaffolds: &[String],
    surgery: &Surgery,
    frame: &Frame,
    params: FingerprintParams,
    tau: f64,
) -> Result<ScoringFunction, PipelineError> {
    Ok(match kind {
        Scorer::Tanimoto => ScoringFunction::Tanimoto {
            queries: scaffolds
                .iter()
                .map(|s| Ok(params.fingerprint(&parse_smiles(s)?)?))
                .collect::<Result<_, PipelineError>>()?,
            params,
        },
        Scorer::Lens => ScoringFunction::Lens {
            target: surgery.target,
            forest: frame.forest.clone(),
            tau,
            params,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generated {
    pub candidates: Vec<String>,
    pub elite_means: Vec<f64>,
}

/// Refines `policy` against `scorer`, then draws the final sample. Failed
/// draws are dropped; duplicates are kept.
pub fn generate(
    cfg: &PipelineConfig,
    policy: &GenerationPolicy,
    placeholders: &[String],
    scorer: &ScoringFunction,
) -> Result<Generated, PipelineError> {
    let refined = refine_policy(
        policy,
        placeholders,
        scorer,
        &cfg.refine_config(),
        &cfg.sampler_config(cfg.seeds.refine),
    )?;
    let candidates = sample_batch(
        &refined.policy,
        placeholders,
        cfg.generator.samples,
        &cfg.sampler_config(cfg.seeds.sample),
    )
    .into_iter()
    .filter_map(Result::ok)
    .collect();
    Ok(Generated {
        candidates,
        elite_means: refined.elite_means,
    })
}

/// Candidates whose lens lies inside the surgery interval.
#[derive(Debug, Clone)]
pub struct Filtered {
    pub smiles: Vec<String>,
    pub fingerprints: Vec<BitFingerprint>,
}

pub fn filter_generated(
    candidates: &[String],
    frame: &Frame,
    surgery: &Surgery,
    params: FingerprintParams,
) -> Result<Filtered, PipelineError> {
    let (smiles, fps): (Vec<String>, Vec<BitFingerprint>) = candidates
        .iter()
        .filter_map(|s| {
            let fp = parse_smiles(s).ok().and_then(|m| params.fingerprint(&m).ok())?;
            Some((s.clone(), fp))
        })
        .unzip();
    let keep = filter_by_score(&fps, &frame.forest, &surgery.interval)?;
    Ok(Filtered {
        smiles: keep.iter().map(|&i| smiles[i].clone()).collect(),
        fingerprints: keep.iter().map(|&i| fps[i].clone()).collect(),
    })
}

/// Indices of `filtered` that survive `rule`.
pub fn downsample(filtered: &[BitFingerprint], rule: &DownsampleRule, range: (f64, f64)) -> Vec<usize> {
    let counts = neighbor_counts(filtered, range);
    let max = rule.threshold(&counts);
    (0..filtered.len()).filter(|&i| counts[i] <= max).collect()
}

pub fn completion_report(surgery: &Surgery, rows: Vec<lacuna_core::completion::VariantRow>) -> CompletionReport {
    CompletionReport {
        target_edges: surgery.spec.target_edges.clone(),
        removed_per_edge: surgery.spec.removed_per_edge.clone(),
        interval: surgery.interval,
        rows,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerReport {
    pub scorer: String,
    pub sampled: usize,
    pub filtered: usize,
    pub elite_means: Vec<f64>,
    pub report: CompletionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RefineArtifact {
    elite_means: Vec<f64>,
}

pub struct Pipeline {
    pub dir: PathBuf,
    pub cfg: PipelineConfig,
}

impl Pipeline {
    pub fn new(dir: impl Into<PathBuf>, cfg: PipelineConfig) -> Self {
        Pipeline { dir: dir.into(), cfg }
    }

    pub fn stage_dir(&self, stage: Stage) -> PathBuf {
        self.dir.join(stage.name())
    }

    pub fn manifest(&self) -> Result<Manifest, PipelineError> {
        let path = self.dir.join("manifest.json");
        match fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| malformed(&path, e)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Manifest::default()),
            Err(e) => Err(io_err(&path)(e)),
        }
    }

    fn write_manifest(&self, m: &Manifest) -> Result<(), PipelineError> {
        let path = self.dir.join("manifest.json");
        fs::write(&path, to_json(m)).map_err(io_err(&path))
    }

    fn lock(&self) -> Result<LockGuard, PipelineError> {
        fs::create_dir_all(&self.dir).map_err(io_err(&self.dir))?;
        let path = self.dir.join(".lock");
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(LockGuard(path)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(PipelineError::Locked(self.dir.clone())),
            Err(e) => Err(io_err(&path)(e)),
        }
    }

    fn config_digest(&self) -> String {
        sha256_hex(self.cfg.to_toml().as_bytes())
    }

    /// Digest of the stage's files as they are on disk, if all are present.
    fn disk_digest(&self, record: &StageRecord, stage: Stage) -> Option<String> {
        let dir = self.stage_dir(stage);
        let mut files = Files::new();
        for name in &record.files {
            files.insert(name.clone(), fs::read(dir.join(name)).ok()?);
        }
        Some(digest_files(&files))
    }

    /// Recorded and intact on disk.
    fn intact(&self, m: &Manifest, stage: Stage) -> Option<String> {
        let rec = m.stages.get(stage.name())?;
        (self.disk_digest(rec, stage)? == rec.digest).then(|| rec.digest.clone())
    }

    /// Whether `stage` has recorded output that is intact on disk.
    pub fn has_output(&self, stage: Stage) -> Result<bool, PipelineError> {
        Ok(self.intact(&self.manifest()?, stage).is_some())
    }

    /// Intact and computed from the current config and upstream outputs.
    pub fn is_current(&self, m: &Manifest, stage: Stage) -> bool {
        let Some(rec) = m.stages.get(stage.name()) else {
            return false;
        };
        self.intact(m, stage).is_some()
            && rec.config == self.config_digest()
            && stage
                .upstream()
                .iter()
                .all(|u| m.stages.get(u.name()).map(|r| &r.digest) == rec.upstream.get(u.name()))
    }

    /// Runs one stage; every upstream stage must already have intact output.
    pub fn run_stage(&self, stage: Stage) -> Result<StageRecord, PipelineError> {
        let _lock = self.lock()?;
        self.run_locked(stage)
    }

    /// Runs every stage needed for `target` whose output is missing, damaged
    /// or stale. Returns the stages that ran.
    pub fn run_to(&self, target: Stage) -> Result<Vec<Stage>, PipelineError> {
        let _lock = self.lock()?;
        let mut ran = Vec::new();
        for stage in target.closure() {
            if !self.is_current(&self.manifest()?, stage) {
                self.run_locked(stage)?;
                ran.push(stage);
            }
        }
        Ok(ran)
    }

    pub fn run_all(&self) -> Result<Vec<Stage>, PipelineError> {
        self.run_to(Stage::Report)
    }

    fn run_locked(&self, stage: Stage) -> Result<StageRecord, PipelineError> {
        let mut m = self.manifest()?;
        let mut upstream = BTreeMap::new();
        for &u in stage.upstream() {
            let digest = self.intact(&m, u).ok_or(PipelineError::MissingUpstream {
                stage: stage.name(),
                missing: u.name(),
            })?;
            upstream.insert(u.name().to_string(), digest);
        }
        let files = match stage {
            Stage::Ingest => self.ingest()?,
            Stage::Fingerprint => self.fingerprint()?,
            Stage::Anomaly => self.anomaly()?,
            Stage::Ph => self.ph()?,
            Stage::Mapper => self.mapper()?,
            Stage::Lacuna => self.lacuna()?,
            Stage::Train => self.train()?,
            Stage::Sample => self.sample()?,
            Stage::Complete => self.complete()?,
            Stage::Report => self.report()?,
        };
        let dir = self.stage_dir(stage);
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
        }
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        for (name, bytes) in &files {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(io_err(&path))?;
        }
        let record = StageRecord {
            digest: digest_files(&files),
            config: self.config_digest(),
            upstream,
            files: files.keys().cloned().collect(),
        };
        m.stages.insert(stage.name().to_string(), record.clone());
        self.write_manifest(&m)?;
        Ok(record)
    }

    pub fn read(&self, stage: Stage, name: &str) -> Result<String, PipelineError> {
        let path = self.stage_dir(stage).join(name);
        fs::read_to_string(&path).map_err(io_err(&path))
    }

    fn read_json<T: DeserializeOwned>(&self, stage: Stage, name: &str) -> Result<T, PipelineError> {
        let path = self.stage_dir(stage).join(name);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        serde_json::from_slice(&bytes).map_err(|e| malformed(&path, e))
    }

    fn read_lines(&self, stage: Stage, name: &str) -> Result<Vec<String>, PipelineError> {
        Ok(self.read(stage, name)?.lines().map(str::to_string).collect())
    }

    pub fn load_dataset(&self) -> Result<Dataset, PipelineError> {
        Ok(ingest(&self.read(Stage::Ingest, "records.tsv")?, self.cfg.fingerprint_params())?.0)
    }

    pub fn load_fingerprints(&self) -> Result<Vec<BitFingerprint>, PipelineError> {
        let path = self.stage_dir(Stage::Fingerprint).join("fingerprints.tsv");
        let p = self.cfg.fingerprint_params();
        self.read(Stage::Fingerprint, "fingerprints.tsv")?
            .lines()
            .map(|line| {
                let (_, hex) = line
                    .split_once('\t')
                    .ok_or_else(|| malformed(&path, "expected id<TAB>hex"))?;
                Ok(BitFingerprint::from_hex(hex, p.n_bits, p.radius)?)
            })
            .collect()
    }

    pub fn load_frame(&self) -> Result<Frame, PipelineError> {
        Ok(Frame {
            forest: self.read_json(Stage::Anomaly, "forest.json")?,
            cover: self.read_json(Stage::Mapper, "cover.json")?,
            clusterer: self.cfg.spectral_params(),
        })
    }

    /// The dataset and graph of the mapper stage.
    pub fn load_snapshot(&self, frame: &Frame) -> Result<Snapshot, PipelineError> {
        Snapshot::from_parts(
            self.load_dataset()?,
            self.read_json(Stage::Mapper, "graph.json")?,
            &frame.forest,
        )
    }

    pub fn load_surgery(&self) -> Result<Surgery, PipelineError> {
        self.read_json(Stage::Lacuna, "lacuna.json")
    }

    fn ingest(&self) -> Result<Files, PipelineError> {
        let text = match (&self.cfg.dataset.path, self.cfg.dataset.builtin) {
            (Some(path), _) => fs::read_to_string(path).map_err(io_err(path))?,
            (None, Some(Builtin::SquareFixture)) => square_library().join("\n"),
            (None, Some(Builtin::OniumCorpus)) => ONIUM_CORPUS.to_string(),
            (None, None) => return Err(ConfigError::Invalid(vec!["dataset: no source".into()]).into()),
        };
        let (dataset, report): (Dataset, IngestReport) = ingest(&text, self.cfg.fingerprint_params())?;
        Ok(Files::from([
            ("records.tsv".into(), dataset.to_text().into_bytes()),
            ("ingest.json".into(), to_json(&report)),
        ]))
    }

    fn fingerprint(&self) -> Result<Files, PipelineError> {
        let dataset = self.load_dataset()?;
        let fps = dataset.fingerprints();
        let ids: Vec<String> = dataset.records.iter().map(|r| r.id.clone()).collect();
        let mut tsv = String::new();
        for r in &dataset.records {
            let _ = writeln!(tsv, "{}\t{}", r.id, r.fingerprint.to_hex());
        }
        let d = pairwise_distances(&fps)?;
        let h = histogram(&d.upper_triangle(), self.cfg.fingerprint.histogram_bins);
        Ok(Files::from([
            ("fingerprints.tsv".into(), tsv.into_bytes()),
            ("distances.csv".into(), d.to_csv(&ids).into_bytes()),
            (
                "dice_histogram.csv".into(),
                format!("{HISTOGRAM_HEADER}{}", h.to_csv("dataset")).into_bytes(),
            ),
        ]))
    }

    fn anomaly(&self) -> Result<Files, PipelineError> {
        let fps = self.load_fingerprints()?;
        let dataset = self.load_dataset()?;
        let psi = self.cfg.forest.max_samples.min(fps.len());
        let forest = IsolationForest::fit(&fps, self.cfg.forest.n_trees, psi, self.cfg.seeds.anomaly)?;
        let mut csv = String::from("id,score\n");
        for (r, s) in dataset.records.iter().zip(forest.batch_scores(&fps)?) {
            let _ = writeln!(csv, "{},{}", r.id, s.0);
        }
        Ok(Files::from([
            ("forest.json".into(), to_json(&forest)),
            ("scores.csv".into(), csv.into_bytes()),
        ]))
    }

    /// Time is the record year when every record has one, else its ordinal.
    fn ph(&self) -> Result<Files, PipelineError> {
        let dataset = self.load_dataset()?;
        let fps = self.load_fingerprints()?;
        let dated = dataset.records.iter().all(|r| r.year.is_some());
        let records: Vec<(BitFingerprint, f64)> = fps
            .into_iter()
            .zip(&dataset.records)
            .enumerate()
            .map(|(i, (fp, r))| (fp, if dated { r.year.unwrap_or_default() } else { i as f64 }))
            .collect();
        let series = cumulative_series(&records, self.cfg.persistence.n_cuts, self.cfg.series_params())?;
        let last = series.diagrams.last().expect("n_cuts >= 1");
        Ok(Files::from([
            ("series.csv".into(), series.to_csv().into_bytes()),
            ("diagram.csv".into(), last.to_csv().into_bytes()),
        ]))
    }

    fn mapper(&self) -> Result<Files, PipelineError> {
        let dataset = self.load_dataset()?;
        let fps = self.load_fingerprints()?;
        let forest: IsolationForest = self.read_json(Stage::Anomaly, "forest.json")?;
        let lens: Vec<f64> = forest.batch_scores(&fps)?.into_iter().map(|s| s.0).collect();
        let cover = build_cover(&lens, self.cfg.cover.n_intervals, self.cfg.cover.overlap)?;
        let graph = build_mapper(&fps[..], &lens, &cover, &self.cfg.spectral_params())?;
        let ids: Vec<String> = dataset.records.iter().map(|r| r.id.clone()).collect();
        Ok(Files::from([
            ("cover.json".into(), to_json(&cover)),
            ("graph.json".into(), to_json(&graph)),
            ("graph.txt".into(), graph.to_text(&ids).into_bytes()),
            ("graph.dot".into(), graph.to_dot().into_bytes()),
            ("features.json".into(), to_json(&detect_features(&graph, 2))),
        ]))
    }

    fn lacuna(&self) -> Result<Files, PipelineError> {
        let frame = self.load_frame()?;
        let snap = self.load_snapshot(&frame)?;
        let edges = if self.cfg.lacuna.edges.is_empty() {
            default_edges(&snap.graph)?
        } else {
            self.cfg.lacuna.edges.clone()
        };
        let surgery = perform_surgery(&frame, &snap, &edges, self.cfg.lacuna.interval)?;
        Ok(Files::from([
            ("lacuna.json".into(), to_json(&surgery)),
            ("reduced.tsv".into(), surgery.reduced(&snap).to_text().into_bytes()),
        ]))
    }

    fn train(&self) -> Result<Files, PipelineError> {
        let frame = self.load_frame()?;
        let snap = self.load_snapshot(&frame)?;
        let surgery = self.load_surgery()?;
        let refs = shared_scaffolds(&snap, &surgery);
        if refs.is_empty() {
            return Err(PipelineError::NoScaffolds);
        }
        let g = &self.cfg.generator;
        let placeholders = placeholder_scaffolds(&refs, g.max_placeholders, g.placeholder_reps, self.cfg.seeds.train);
        let scaffolds: Vec<String> = refs.into_iter().map(|s| s.smiles).collect();
        let reduced = ingest(&self.read(Stage::Lacuna, "reduced.tsv")?, self.cfg.fingerprint_params())?.0;
        let corpus: Vec<String> = reduced.records.into_iter().map(|r| r.smiles).collect();
        let policy = train_policy(&corpus, g.order)?;
        let lines = |v: &[String]| v.iter().map(|s| format!("{s}\n")).collect::<String>().into_bytes();
        Ok(Files::from([
            ("policy.txt".into(), policy.to_text().into_bytes()),
            ("scaffolds.txt".into(), lines(&scaffolds)),
            ("placeholders.txt".into(), lines(&placeholders)),
        ]))
    }

    fn sample(&self) -> Result<Files, PipelineError> {
        let frame = self.load_frame()?;
        let surgery = self.load_surgery()?;
        let policy = GenerationPolicy::from_text(&self.read(Stage::Train, "policy.txt")?)?;
        let scaffolds = self.read_lines(Stage::Train, "scaffolds.txt")?;
        let placeholders = self.read_lines(Stage::Train, "placeholders.txt")?;
        let mut files = Files::new();
        for &kind in &self.cfg.complete.scorers {
            let scorer = build_scorer(
                kind,
                &scaffolds,
                &surgery,
                &frame,
                self.cfg.fingerprint_params(),
                self.cfg.generator.tau,
            )?;
            let out = generate(&self.cfg, &policy, &placeholders, &scorer)?;
            let scores = score_candidates(&out.candidates, &scorer);
            let mut tsv = String::new();
            for (s, v) in out.candidates.iter().zip(scores) {
                let _ = writeln!(tsv, "{s}\t{v}");
            }
            files.insert(format!("candidates_{}.tsv", kind.name()), tsv.into_bytes());
            files.insert(
                format!("refine_{}.json", kind.name()),
                to_json(&RefineArtifact {
                    elite_means: out.elite_means,
                }),
            );
        }
        Ok(files)
    }

    fn complete(&self) -> Result<Files, PipelineError> {
        let frame = self.load_frame()?;
        let snap = self.load_snapshot(&frame)?;
        let surgery = self.load_surgery()?;
        let reduced = surgery.reduced(&snap).fingerprints();
        let ctx = surgery.context(&frame, &snap, &reduced);
        let mut reports = Vec::new();
        let mut files = Files::new();
        for &kind in &self.cfg.complete.scorers {
            let candidates: Vec<String> = self
                .read_lines(Stage::Sample, &format!("candidates_{}.tsv", kind.name()))?
                .into_iter()
                .map(|l| l.split('\t').next().unwrap_or_default().to_string())
                .collect();
            let refine: RefineArtifact = self.read_json(Stage::Sample, &format!("refine_{}.json", kind.name()))?;
            let filtered = filter_generated(&candidates, &frame, &surgery, self.cfg.fingerprint_params())?;
            let rows = ctx.evaluate_variants(
                &filtered.fingerprints,
                &self.cfg.complete.downsample,
                self.cfg.neighbor_range(),
            )?;
            files.insert(
                format!("filtered_{}.tsv", kind.name()),
                filtered
                    .smiles
                    .iter()
                    .map(|s| format!("{s}\n"))
                    .collect::<String>()
                    .into_bytes(),
            );
            reports.push(ScorerReport {
                scorer: kind.name().to_string(),
                sampled: candidates.len(),
                filtered: filtered.smiles.len(),
                elite_means: refine.elite_means,
                report: completion_report(&surgery, rows),
            });
        }
        files.insert("completion.json".into(), to_json(&reports));
        Ok(files)
    }

    pub fn load_completion(&self) -> Result<Vec<ScorerReport>, PipelineError> {
        self.read_json(Stage::Complete, "completion.json")
    }

    fn report(&self) -> Result<Files, PipelineError> {
        let reports = self.load_completion()?;
        let dataset = self.load_dataset()?;
        let surgery = self.load_surgery()?;
        let features: serde_json::Value = self.read_json(Stage::Mapper, "features.json")?;
        let series = self.read(Stage::Ph, "series.csv")?;
        let bins = self.cfg.fingerprint.histogram_bins;
        let params = self.cfg.fingerprint_params();

        let withheld: Vec<BitFingerprint> = surgery
            .spec
            .removed
            .iter()
            .map(|&i| dataset.records[i].fingerprint.clone())
            .collect();
        let mut hist = String::from(HISTOGRAM_HEADER);
        hist.push_str(&histogram(&pairwise_distances(&withheld)?.upper_triangle(), bins).to_csv("withheld"));
        let mut text = String::new();
        for r in &reports {
            let filtered: Vec<BitFingerprint> = self
                .read_lines(Stage::Complete, &format!("filtered_{}.tsv", r.scorer))?
                .iter()
                .filter_map(|s| parse_smiles(s).ok().and_then(|m| params.fingerprint(&m).ok()))
                .collect();
            hist.push_str(&histogram(&pairwise_distances(&filtered)?.upper_triangle(), bins).to_csv(&r.scorer));
            let _ = writeln!(text, "[{}]", r.scorer);
            let _ = writeln!(text, "sampled\t{}\nfiltered\t{}", r.sampled, r.filtered);
            text.push_str(&r.report.to_table());
            text.push('\n');
        }
        let summary = serde_json::json!({
            "features": features,
            "surgery": {
                "edges": surgery.edges,
                "removed": surgery.spec.removed_ids,
                "interval": surgery.interval,
                "post_surgery": surgery.post_surgery,
            },
            "scorers": reports,
        });
        Ok(Files::from([
            ("report.txt".into(), text.into_bytes()),
            ("report.json".into(), to_json(&summary)),
            ("histograms.csv".into(), hist.into_bytes()),
            ("ph_series.csv".into(), series.into_bytes()),
        ]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closure_is_topological() {
        assert_eq!(
            Stage::Mapper.closure(),
            vec![Stage::Ingest, Stage::Fingerprint, Stage::Anomaly, Stage::Mapper]
        );
        assert_eq!(Stage::Report.closure(), Stage::ALL.to_vec());
        for s in Stage::ALL {
            assert_eq!(Stage::from_name(s.name()), Some(s));
            for u in s.upstream() {
                assert!(u < &s);
            }
        }
    }

    #[test]
    fn digest_frames_names_and_lengths() {
        let a = Files::from([("a".to_string(), b"bc".to_vec())]);
        let b = Files::from([("ab".to_string(), b"c".to_vec())]);
        assert_ne!(digest_files(&a), digest_files(&b));
        assert_eq!(digest_files(&a), digest_files(&a.clone()));
        assert_eq!(digest_files(&Files::new()).len(), 64);
    }
}
