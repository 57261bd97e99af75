//! Offline fixture worlds: a directory layout bundling everything a
//! fully simulated run needs, plus the harness that wires it to the
//! engine.
//!
//! Layout of a fixture directory:
//!
//! ```text
//! world/
//!   config.toml          # optional RunConfig overrides
//!   seeds.txt            # one seed URL per line
//!   censored_hosts.txt   # hostnames the simulated censor injects for
//!   dict.txt             # segmenter dictionary
//!   corpus.tsv           # local frequency table (#N header)
//!   pages/               # html files + pages.json url->file index
//!   search/              # mock result pages, one json per query
//! ```

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::ingest::{FixturePageSource, PageIndex};
use crate::pipeline::{Clock, Engine, EngineDeps, PipelineError, RunConfig, SearchBackendKind};
use crate::probe::sim::{CensorBehavior, SimulatedCensor};
use crate::probe::Prober;
use crate::rank::LocalCorpus;
use crate::search::{MockSearchBackend, SearchClient};
use crate::segment::SegmenterDictionary;

/// Declarative description of a fixture world, written out by
/// `write_to_dir`. Tests and fixture authors build one of these instead
/// of hand-placing files.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct WorldSpec {
    /// (url, html body) pairs.
    pub pages: Vec<(String, String)>,
    pub seeds: Vec<String>,
    pub censored_hosts: Vec<String>,
    pub dict_words: Vec<String>,
    /// (phrase surface, document frequency) pairs.
    pub corpus: Vec<(String, u64)>,
    pub corpus_size: u64,
    /// (query surface, result urls) pairs for the mock search backend.
    pub searches: Vec<(String, Vec<String>)>,
    /// Run overrides serialized into config.toml.
    pub config: Option<RunConfig>,
}

impl WorldSpec {
    pub fn write_to_dir(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir.join("pages"))?;
        std::fs::create_dir_all(dir.join("search"))?;

        let mut index = PageIndex::default();
        for (i, (url, html)) in self.pages.iter().enumerate() {
            let file = format!("page{i:03}.html");
            std::fs::write(dir.join("pages").join(&file), html)?;
            index.pages.insert(url.clone(), file);
        }
        std::fs::write(
            dir.join("pages/pages.json"),
            serde_json::to_string_pretty(&index)?,
        )?;

        for (query, urls) in &self.searches {
            MockSearchBackend::write_fixture(&dir.join("search"), query, urls)?;
        }

        std::fs::write(dir.join("seeds.txt"), self.seeds.join("\n") + "\n")?;
        std::fs::write(
            dir.join("censored_hosts.txt"),
            self.censored_hosts.join("\n") + "\n",
        )?;
        std::fs::write(dir.join("dict.txt"), self.dict_words.join("\n") + "\n")?;

        let mut corpus = format!("#N {}\n", self.corpus_size.max(1));
        for (phrase, df) in &self.corpus {
            corpus.push_str(&format!("{phrase}\t{df}\n"));
        }
        std::fs::write(dir.join("corpus.tsv"), corpus)?;

        if let Some(config) = &self.config {
            let text = toml::to_string_pretty(config)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
            std::fs::write(dir.join("config.toml"), text)?;
        }
        Ok(())
    }
}

/// Control hostname used by simulated runs; kept out of every censored
/// set so target validation passes.
pub const SIM_CONTROL_HOST: &str = "control.invalid";

/// An engine wired entirely to fixtures plus the live simulated censor.
/// Keep the harness alive for as long as the engine runs — dropping it
/// shuts the censor down.
pub struct SimHarness {
    pub engine: Engine,
    _censor: SimulatedCensor,
}

impl SimHarness {
    /// Opens a fixture directory. `tune` runs on the config after the
    /// directory's `config.toml` (if any) and before the engine is built,
    /// for command-line overrides.
    pub fn open(dir: &Path, tune: impl FnOnce(&mut RunConfig)) -> Result<Self, PipelineError> {
        let mut config = match std::fs::read_to_string(dir.join("config.toml")) {
            Ok(text) => toml::from_str(&text)
                .map_err(|e| PipelineError::BadConfig(format!("config.toml: {e}")))?,
            Err(err) if err.kind() == std::io::ErrorKind::NotFound => RunConfig::default(),
            Err(err) => return Err(err.into()),
        };
        config.seeds_file = Some(dir.join("seeds.txt"));
        config.search.backend = SearchBackendKind::Mock;
        config.search.fixture_dir = Some(dir.join("search"));
        config.dictionary = Some(dir.join("dict.txt"));
        config.corpus.path = Some(dir.join("corpus.tsv"));
        if config.probe.control_host.is_empty() {
            config.probe.control_host = SIM_CONTROL_HOST.to_string();
        }
        // Simulated probes are loopback; long waits only slow the run.
        if config.probe.wait_ms > 100 {
            config.probe.wait_ms = 50;
        }
        tune(&mut config);
        config.validate()?;

        let censored = load_host_set(&dir.join("censored_hosts.txt"))?;
        if censored.contains(&config.probe.control_host) {
            return Err(PipelineError::BadConfig(format!(
                "control host {:?} is in censored_hosts.txt; validation would fail",
                config.probe.control_host
            )));
        }
        let censor = SimulatedCensor::spawn(CensorBehavior::InjectSet(censored), Duration::ZERO)
            .map_err(PipelineError::Io)?;

        let mut prober = Prober::new(vec![censor.target()], config.probe.settings());
        prober.validate_targets(&config.probe.control_host);

        let clock = Clock::fixed_epoch();
        let dict = SegmenterDictionary::load(&dir.join("dict.txt"))?;
        let corpus = LocalCorpus::load(&dir.join("corpus.tsv"))
            .map_err(|e| PipelineError::BadConfig(format!("corpus.tsv: {e}")))?;
        let pages = FixturePageSource::open(&dir.join("pages"), clock.clone())?;
        let search = SearchClient::new(Box::new(MockSearchBackend::new(dir.join("search"))));

        let deps = EngineDeps {
            search,
            pages: Box::new(pages),
            corpus: Box::new(corpus),
            prober,
            dict,
            clock,
        };
        Ok(SimHarness {
            engine: Engine::new(config, deps),
            _censor: censor,
        })
    }
}

fn load_host_set(path: &PathBuf) -> Result<HashSet<String>, PipelineError> {
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.to_ascii_lowercase())
        .collect())
}
