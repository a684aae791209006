use std::fs;
use std::io::{BufReader, Write};
use std::path::Path;
use std::sync::Arc;

use anyhow::anyhow;

use forum_sentinel::corpus::{corpus_stats, filter_and_label, load_corpus, write_corpus, CorpusError, Thread};
use forum_sentinel::discourse::{
    sense_distribution, write_tag_records, ConnectiveLexicon, DiscourseError, ImportedTags,
    TagRecord, TagSource,
};
use forum_sentinel::eval::{self, annotate_significance, EmitFormat, EvalError};
use forum_sentinel::features::{
    build_vocabulary, prepare_threads, read_feature_dump, write_feature_dump, DumpRecord,
    FeatureConfig, FeatureError, Featurizer, PreparedThread,
};
use forum_sentinel::model::{self, write_model, Dataset, ModelError};
use forum_sentinel::syngen::{self, GenSpec, SynGenError};

use crate::config::RunConfig;
use crate::Failure;

fn corpus_err(e: CorpusError) -> Failure {
    match e {
        CorpusError::Io { .. } => Failure::io(e.into()),
        other => Failure::input(other.into()),
    }
}

fn discourse_err(e: DiscourseError) -> Failure {
    match e {
        DiscourseError::Io { .. } => Failure::io(e.into()),
        other => Failure::input(other.into()),
    }
}

fn feature_err(e: FeatureError) -> Failure {
    match e {
        FeatureError::Io(_) => Failure::io(e.into()),
        FeatureError::Discourse(d) => discourse_err(d),
        FeatureError::MalformedDump { .. }
        | FeatureError::InconsistentLength { .. }
        | FeatureError::NonFinite(_)
        | FeatureError::UnknownFeature(_)
        | FeatureError::DuplicateName(_) => Failure::input(e.into()),
        other => Failure::failed(other.into()),
    }
}

fn eval_err(e: EvalError) -> Failure {
    match e {
        EvalError::Feature(f) => feature_err(f),
        other => Failure::failed(other.into()),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::io(anyhow!("{}: {e}", path.display()))
}

/// Writes `content` to `<out>/<name>`, or to stdout without an output directory.
fn emit(cfg: &RunConfig, name: &str, content: &[u8]) -> Result<(), Failure> {
    match &cfg.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
            let path = dir.join(name);
            fs::write(&path, content).map_err(|e| io_err(&path, e))?;
            log::info!("wrote {}", path.display());
            Ok(())
        }
        None => std::io::stdout()
            .write_all(content)
            .map_err(|e| Failure::io(e.into())),
    }
}

fn load_threads(cfg: &RunConfig) -> Result<Vec<Thread>, Failure> {
    let loaded = load_corpus(cfg.corpus()?).map_err(corpus_err)?;
    Ok(filter_and_label(loaded.threads))
}

enum Tagger {
    Lexicon(ConnectiveLexicon),
    Builtin,
    Imported(ImportedTags),
}

impl Tagger {
    fn load(cfg: &RunConfig) -> Result<Self, Failure> {
        if let Some(p) = &cfg.tags {
            return Ok(Tagger::Imported(ImportedTags::load(p).map_err(discourse_err)?));
        }
        match &cfg.lexicon {
            Some(p) => Ok(Tagger::Lexicon(ConnectiveLexicon::load(p).map_err(discourse_err)?)),
            None => Ok(Tagger::Builtin),
        }
    }

    fn source(&self) -> TagSource<'_> {
        match self {
            Tagger::Lexicon(l) => TagSource::Lexicon(l),
            Tagger::Builtin => TagSource::Lexicon(ConnectiveLexicon::english()),
            Tagger::Imported(t) => TagSource::Imported(t),
        }
    }
}

fn prepare(cfg: &RunConfig, threads: &[Thread]) -> Result<Vec<PreparedThread>, Failure> {
    let tagger = Tagger::load(cfg)?;
    prepare_threads(threads, Some(tagger.source())).map_err(feature_err)
}

pub fn ingest(cfg: &RunConfig) -> Result<(), Failure> {
    let threads = load_threads(cfg)?;
    let table = corpus_stats(&threads).render_table();
    if cfg.out.is_some() {
        let mut buf = Vec::new();
        write_corpus(&threads, &mut buf).map_err(|e| Failure::io(e.into()))?;
        emit(cfg, "threads.jsonl", &buf)?;
        emit(cfg, "stats.txt", table.as_bytes())?;
    }
    print!("{table}");
    Ok(())
}

pub fn tag(cfg: &RunConfig) -> Result<(), Failure> {
    let threads = load_threads(cfg)?;
    let prepared = prepare(cfg, &threads)?;
    let mut records = Vec::new();
    for (t, p) in threads.iter().zip(&prepared) {
        for (post, tagged) in t.student_posts().zip(&p.posts) {
            records.push(TagRecord::from_post(&t.course_id, &t.thread_id, &post.post_id, &tagged.discourse));
        }
    }
    let mut buf = Vec::new();
    write_tag_records(&records, &mut buf).map_err(|e| Failure::io(e.into()))?;
    let distribution = match sense_distribution(prepared.iter().flat_map(|t| t.posts.iter().map(|p| &p.discourse))) {
        Some(d) => d.render(),
        None => "no connectives tagged\n".to_string(),
    };
    emit(cfg, "tags.tsv", &buf)?;
    if cfg.out.is_some() {
        emit(cfg, "distribution.txt", distribution.as_bytes())?;
        print!("{distribution}");
    } else {
        eprint!("{distribution}");
    }
    Ok(())
}

fn featurizer(cfg: &RunConfig, prepared: &[PreparedThread]) -> Result<Featurizer, Failure> {
    let vocabulary = if cfg.features.uses_lexical() {
        Some(Arc::new(build_vocabulary(prepared).map_err(feature_err)?))
    } else {
        None
    };
    Featurizer::new(cfg.features, vocabulary, Default::default()).map_err(feature_err)
}

pub fn featurize(cfg: &RunConfig) -> Result<(), Failure> {
    let threads = load_threads(cfg)?;
    let prepared = prepare(cfg, &threads)?;
    let f = featurizer(cfg, &prepared)?;
    let vectors = f.featurize_all(&prepared).map_err(feature_err)?;
    let records: Vec<DumpRecord> = prepared
        .iter()
        .zip(vectors)
        .map(|(t, (vector, label))| DumpRecord {
            course_id: t.course_id.clone(),
            thread_id: t.thread_id.clone(),
            label,
            vector,
        })
        .collect();
    let mut buf = Vec::new();
    write_feature_dump(f.space(), &records, &mut buf).map_err(|e| Failure::io(e.into()))?;
    emit(cfg, "features.tsv", &buf)
}

pub fn train(cfg: &RunConfig, dump: Option<&Path>) -> Result<(), Failure> {
    let data = match dump {
        Some(path) => {
            let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
            let d = read_feature_dump(BufReader::new(file)).map_err(feature_err)?;
            let examples: Vec<_> = d.records.into_iter().map(|r| (r.vector, r.label)).collect();
            Dataset::new(d.space, &examples)
        }
        None => {
            let threads = load_threads(cfg)?;
            let prepared = prepare(cfg, &threads)?;
            let f = featurizer(cfg, &prepared)?;
            let examples = f.featurize_all(&prepared).map_err(feature_err)?;
            Dataset::new(f.space().clone(), &examples)
        }
    };
    let data = data.map_err(model_input_err)?;
    let (m, report) = model::train(&data, &cfg.train).map_err(|e| Failure::failed(e.into()))?;
    eprintln!(
        "trained on {} threads ({} intervened): {:?} after {} iterations, loss {:.6}, |g|inf {:.3e}",
        data.len(),
        data.n_pos(),
        report.stop,
        report.iterations,
        report.final_loss,
        report.grad_inf_norm
    );
    let mut buf = Vec::new();
    write_model(&m, &mut buf).map_err(|e| Failure::io(e.into()))?;
    emit(cfg, "model.txt", &buf)
}

fn model_input_err(e: ModelError) -> Failure {
    match e {
        ModelError::Io(_) => Failure::io(e.into()),
        other => Failure::input(other.into()),
    }
}

fn render(cfg: &RunConfig, report: &eval::EvalReport, stem: &str) -> Result<String, Failure> {
    let text = report.render(cfg.emit);
    if cfg.out.is_some() {
        emit(cfg, &format!("{stem}.json"), report.render_records().as_bytes())?;
        match cfg.emit {
            EmitFormat::Table => emit(cfg, &format!("{stem}.txt"), text.as_bytes())?,
            EmitFormat::Csv => emit(cfg, &format!("{stem}.csv"), text.as_bytes())?,
            EmitFormat::Records => {}
        }
    }
    Ok(text)
}

pub fn eval(cfg: &RunConfig, baseline: Option<&str>, rounds: usize) -> Result<(), Failure> {
    let baseline: Option<FeatureConfig> = baseline
        .map(|b| b.parse().map_err(|e: String| Failure::usage(anyhow!("--baseline: {e}"))))
        .transpose()?;
    let threads = load_threads(cfg)?;
    let prepared = prepare(cfg, &threads)?;
    let mut report = eval::evaluate(&prepared, cfg.regime, &cfg.eval_config(cfg.features)).map_err(eval_err)?;
    if let Some(b) = baseline {
        let base = eval::evaluate(&prepared, cfg.regime, &cfg.eval_config(b)).map_err(eval_err)?;
        annotate_significance(&mut report, &base, rounds, cfg.seed).map_err(eval_err)?;
        render(cfg, &base, "baseline")?;
    }
    let text = render(cfg, &report, "report")?;
    print!("{text}");
    Ok(())
}

pub fn syngen(cfg: &RunConfig, spec: &Path) -> Result<(), Failure> {
    let spec = GenSpec::load(spec).map_err(|e| match e {
        SynGenError::Io(_) => Failure::io(anyhow!("{}: {e}", spec.display())),
        other => Failure::input(other.into()),
    })?;
    let threads = syngen::generate(&spec).map_err(|e| Failure::input(e.into()))?;
    let mut buf = Vec::new();
    write_corpus(&threads, &mut buf).map_err(|e| Failure::io(e.into()))?;
    emit(cfg, "corpus.jsonl", &buf)
}
