use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use super::axiom::{Form, NormalizedAxiom};
use super::signature::{ClassId, RelId, Signature};
use super::tsv::{parse_normalized, serialize_normalized};
use super::KbError;

/// A normalized knowledge base with its evaluation split.
///
/// `valid` and `test` hold GCI2 axioms only and are disjoint from each other
/// and from the training axioms.
#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    pub signature: Signature,
    by_form: [Vec<NormalizedAxiom>; 9],
    pub valid: Vec<NormalizedAxiom>,
    pub test: Vec<NormalizedAxiom>,
    /// Named candidate class sets, e.g. `proteins`.
    pub pools: BTreeMap<String, Vec<ClassId>>,
}

impl KnowledgeBase {
    pub fn new(
        signature: Signature,
        train: Vec<NormalizedAxiom>,
        valid: Vec<NormalizedAxiom>,
        test: Vec<NormalizedAxiom>,
        pools: BTreeMap<String, Vec<ClassId>>,
    ) -> Result<Self, KbError> {
        let mut seen: HashMap<NormalizedAxiom, &'static str> = HashMap::new();
        for (split, axioms) in [("train", &train), ("valid", &valid), ("test", &test)] {
            for ax in axioms {
                if !ax.is_valid_in(&signature) {
                    return Err(KbError::Dataset(format!(
                        "{split} axiom {ax:?} references ids outside the signature"
                    )));
                }
                if split != "train" && ax.form() != Form::Gci2 {
                    return Err(KbError::Dataset(format!(
                        "{split} split must contain GCI2 only, found {}",
                        ax.display(&signature)
                    )));
                }
                match seen.get(ax) {
                    Some(&other) if other != split => {
                        return Err(KbError::Dataset(format!(
                            "axiom {} appears in both {other} and {split}",
                            ax.display(&signature)
                        )))
                    }
                    Some(_) => {}
                    None => {
                        seen.insert(*ax, split);
                    }
                }
            }
        }
        for (name, pool) in &pools {
            if let Some(c) = pool.iter().find(|c| !signature.has_class(**c)) {
                return Err(KbError::Dataset(format!(
                    "pool {name} references unknown class id {c}"
                )));
            }
        }
        let mut by_form: [Vec<NormalizedAxiom>; 9] = Default::default();
        for ax in train {
            by_form[ax.form().index()].push(ax);
        }
        Ok(KnowledgeBase {
            signature,
            by_form,
            valid,
            test,
            pools,
        })
    }

    /// A knowledge base with training axioms only.
    pub fn from_axioms(signature: Signature, train: Vec<NormalizedAxiom>) -> Result<Self, KbError> {
        Self::new(signature, train, Vec::new(), Vec::new(), BTreeMap::new())
    }

    /// Training axioms of one form.
    pub fn axioms(&self, form: Form) -> &[NormalizedAxiom] {
        &self.by_form[form.index()]
    }

    /// All training axioms, grouped by form.
    pub fn train(&self) -> impl Iterator<Item = &NormalizedAxiom> + '_ {
        self.by_form.iter().flatten()
    }

    pub fn num_train(&self) -> usize {
        self.by_form.iter().map(Vec::len).sum()
    }

    /// Per-form training counts, zero counts omitted.
    pub fn form_counts(&self) -> BTreeMap<Form, usize> {
        Form::ALL
            .iter()
            .filter(|f| !self.axioms(**f).is_empty())
            .map(|f| (*f, self.axioms(*f).len()))
            .collect()
    }

    pub fn pool(&self, name: &str) -> Option<&[ClassId]> {
        self.pools.get(name).map(Vec::as_slice)
    }

    /// Training GCI2 triples.
    pub fn train_gci2(&self) -> impl Iterator<Item = (ClassId, RelId, ClassId)> + '_ {
        self.axioms(Form::Gci2).iter().filter_map(|a| a.as_gci2())
    }
}

fn read(path: &Path) -> Result<String, KbError> {
    fs::read_to_string(path).map_err(|e| KbError::File {
        path: path.to_owned(),
        reason: e.to_string(),
    })
}

fn with_path(path: &Path, e: KbError) -> KbError {
    KbError::File {
        path: path.to_owned(),
        reason: e.to_string(),
    }
}

/// Load `train.tsv` and the optional `valid.tsv`, `test.tsv`, `pools.tsv`.
pub fn load_dataset(dir: &Path) -> Result<KnowledgeBase, KbError> {
    let mut sig = Signature::new();
    let train_path = dir.join("train.tsv");
    if !train_path.is_file() {
        return Err(KbError::File {
            path: train_path,
            reason: "missing train.tsv".into(),
        });
    }
    let train = parse_normalized(&read(&train_path)?, &mut sig).map_err(|e| with_path(&train_path, e))?;
    let mut split = |name: &str| -> Result<Vec<NormalizedAxiom>, KbError> {
        let path = dir.join(name);
        if !path.is_file() {
            return Ok(Vec::new());
        }
        parse_normalized(&read(&path)?, &mut sig).map_err(|e| with_path(&path, e))
    };
    let valid = split("valid.tsv")?;
    let test = split("test.tsv")?;

    let mut pools: BTreeMap<String, Vec<ClassId>> = BTreeMap::new();
    let pools_path = dir.join("pools.tsv");
    if pools_path.is_file() {
        for (i, line) in read(&pools_path)?.lines().enumerate() {
            let line = line.strip_suffix('\r').unwrap_or(line);
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 2 || fields.iter().any(|f| f.is_empty()) {
                return Err(with_path(
                    &pools_path,
                    KbError::Parse {
                        line: i + 1,
                        reason: format!("expected 2 non-empty fields, got {}", fields.len()),
                    },
                ));
            }
            let class = sig.intern_class(fields[1]);
            let pool = pools.entry(fields[0].to_owned()).or_default();
            if !pool.contains(&class) {
                pool.push(class);
            }
        }
    }
    KnowledgeBase::new(sig, train, valid, test, pools)
}

/// Write a knowledge base in the layout read by [`load_dataset`].
pub fn write_dataset(kb: &KnowledgeBase, dir: &Path) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let train: Vec<NormalizedAxiom> = kb.train().copied().collect();
    fs::write(dir.join("train.tsv"), serialize_normalized(&train, &kb.signature))?;
    fs::write(dir.join("valid.tsv"), serialize_normalized(&kb.valid, &kb.signature))?;
    fs::write(dir.join("test.tsv"), serialize_normalized(&kb.test, &kb.signature))?;
    let mut pools = String::new();
    for (name, classes) in &kb.pools {
        for c in classes {
            pools.push_str(name);
            pools.push('\t');
            pools.push_str(kb.signature.class_name(*c));
            pools.push('\n');
        }
    }
    fs::write(dir.join("pools.tsv"), pools)
}
