use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{InteractionDataset, Record, SatisfactionRule};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    /// `user::item::rating::timestamp`
    MovielensDat,
    /// Header `user,item,value[,timestamp]`.
    CsvTriplets,
    /// KuaiRec matrix export with `user_id`, `video_id`, `watch_ratio`.
    KuairecCsv,
}

impl std::str::FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "movielens_dat" => Ok(DataFormat::MovielensDat),
            "csv_triplets" => Ok(DataFormat::CsvTriplets),
            "kuairec_csv" => Ok(DataFormat::KuairecCsv),
            other => Err(Error::Config(format!("unknown data format `{other}`"))),
        }
    }
}

struct RawRecord {
    user: String,
    item: String,
    value: f64,
    timestamp: Option<i64>,
}

/// Reads a dataset and re-indexes user and item ids densely.
///
/// Ids are ordered numerically when every id parses as an integer and
/// lexicographically otherwise, so the mapping is stable across runs.
pub fn ingest(path: &Path, format: DataFormat) -> Result<InteractionDataset> {
    let text = fs::read(path)?;
    let text = String::from_utf8_lossy(&text);
    let (raw, satisfaction) = match format {
        DataFormat::MovielensDat => (parse_movielens(&text)?, SatisfactionRule::MOVIELENS),
        DataFormat::CsvTriplets => (parse_triplets(&text)?, SatisfactionRule::MOVIELENS),
        DataFormat::KuairecCsv => (parse_kuairec(&text)?, SatisfactionRule::KUAIREC),
    };
    if raw.is_empty() {
        return Err(Error::Data(format!("{} holds no records", path.display())));
    }
    Ok(reindex(raw, satisfaction))
}

fn parse_movielens(text: &str) -> Result<Vec<RawRecord>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split("::").collect();
        if fields.len() != 4 {
            return Err(Error::Malformed {
                line: n + 1,
                message: format!("expected 4 `::`-separated fields, got {}", fields.len()),
            });
        }
        out.push(RawRecord {
            user: fields[0].to_string(),
            item: fields[1].to_string(),
            value: parse_f64(fields[2], n + 1)?,
            timestamp: Some(parse_i64(fields[3], n + 1)?),
        });
    }
    Ok(out)
}

fn parse_triplets(text: &str) -> Result<Vec<RawRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (u, i, v) = match (col("user"), col("item"), col("value")) {
        (Some(u), Some(i), Some(v)) => (u, i, v),
        _ => {
            return Err(Error::Malformed {
                line: 1,
                message: "header must contain user,item,value".into(),
            })
        }
    };
    let ts = col("timestamp");
    let mut out = Vec::new();
    for (n, row) in reader.records().enumerate() {
        let row = row?;
        let line = n + 2;
        let get = |c: usize| {
            row.get(c).ok_or_else(|| Error::Malformed {
                line,
                message: format!("missing column {c}"),
            })
        };
        out.push(RawRecord {
            user: get(u)?.to_string(),
            item: get(i)?.to_string(),
            value: parse_f64(get(v)?, line)?,
            timestamp: match ts {
                Some(c) if !get(c)?.is_empty() => Some(parse_i64(get(c)?, line)?),
                _ => None,
            },
        });
    }
    Ok(out)
}

fn parse_kuairec(text: &str) -> Result<Vec<RawRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (u, i, w) = match (col("user_id"), col("video_id"), col("watch_ratio")) {
        (Some(u), Some(i), Some(w)) => (u, i, w),
        _ => {
            return Err(Error::Malformed {
                line: 1,
                message: "header must contain user_id,video_id,watch_ratio".into(),
            })
        }
    };
    let ts = col("timestamp").or_else(|| col("time"));
    let mut out = Vec::new();
    for (n, row) in reader.records().enumerate() {
        let row = row?;
        let line = n + 2;
        let field = |c: usize| row.get(c).unwrap_or("");
        let timestamp = match ts {
            // KuaiRec timestamps are fractional seconds.
            Some(c) if !field(c).is_empty() => field(c).parse::<f64>().ok().map(|t| t as i64),
            _ => None,
        };
        out.push(RawRecord {
            user: field(u).to_string(),
            item: field(i).to_string(),
            value: parse_f64(field(w), line)?,
            timestamp,
        });
    }
    Ok(out)
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Malformed {
            line,
            message: format!("`{s}` is not a finite number"),
        })
}

fn parse_i64(s: &str, line: usize) -> Result<i64> {
    s.trim().parse::<i64>().map_err(|_| Error::Malformed {
        line,
        message: format!("`{s}` is not an integer timestamp"),
    })
}

fn sorted_ids<'a>(ids: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut unique: Vec<String> = ids.map(str::to_string).collect();
    unique.sort_unstable();
    unique.dedup();
    let numeric: Option<Vec<i64>> = unique.iter().map(|s| s.parse::<i64>().ok()).collect();
    if let Some(nums) = numeric {
        let mut pairs: Vec<(i64, String)> = nums.into_iter().zip(unique).collect();
        pairs.sort();
        pairs.into_iter().map(|(_, s)| s).collect()
    } else {
        unique
    }
}

fn reindex(raw: Vec<RawRecord>, satisfaction: SatisfactionRule) -> InteractionDataset {
    let user_ids = sorted_ids(raw.iter().map(|r| r.user.as_str()));
    let item_ids = sorted_ids(raw.iter().map(|r| r.item.as_str()));
    let user_index: HashMap<&str, usize> = user_ids.iter().enumerate().map(|(k, s)| (s.as_str(), k)).collect();
    let item_index: HashMap<&str, usize> = item_ids.iter().enumerate().map(|(k, s)| (s.as_str(), k)).collect();
    let records = raw
        .iter()
        .map(|r| Record {
            user: user_index[r.user.as_str()],
            item: item_index[r.item.as_str()],
            value: r.value,
            timestamp: r.timestamp,
        })
        .collect();
    InteractionDataset {
        num_users: user_ids.len(),
        num_items: item_ids.len(),
        records,
        satisfaction,
        user_ids,
        item_ids,
        item_genres: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenreFormat {
    /// MovieLens `movies.dat`: `item::title::Genre1|Genre2`.
    MovielensDat,
    /// CSV with header `item,genres` and `|`-separated genre names.
    Csv,
}

/// Attaches one-hot genre vectors to the dataset's items. Items missing from
/// the genre file get an all-zero vector.
pub fn attach_genres(dataset: &mut InteractionDataset, path: &Path, format: GenreFormat) -> Result<()> {
    let bytes = fs::read(path)?;
    let text = String::from_utf8_lossy(&bytes);
    let mut per_item: HashMap<String, Vec<String>> = HashMap::new();
    match format {
        GenreFormat::MovielensDat => {
            for (n, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let fields: Vec<&str> = line.split("::").collect();
                if fields.len() < 3 {
                    return Err(Error::Malformed {
                        line: n + 1,
                        message: "expected item::title::genres".into(),
                    });
                }
                let genres = fields[fields.len() - 1]
                    .split('|')
                    .map(|g| g.trim().to_string())
                    .filter(|g| !g.is_empty())
                    .collect();
                per_item.insert(fields[0].trim().to_string(), genres);
            }
        }
        GenreFormat::Csv => {
            let mut reader = csv::ReaderBuilder::new()
                .trim(csv::Trim::All)
                .from_reader(text.as_bytes());
            for row in reader.records() {
                let row = row?;
                let item = row.get(0).unwrap_or("").to_string();
                let genres = row
                    .get(1)
                    .unwrap_or("")
                    .split('|')
                    .map(|g| g.trim().to_string())
                    .filter(|g| !g.is_empty())
                    .collect();
                per_item.insert(item, genres);
            }
        }
    }
    let vocab: BTreeMap<String, usize> = {
        let mut names: Vec<&String> = per_item.values().flatten().collect();
        names.sort();
        names.dedup();
        names.into_iter().enumerate().map(|(k, g)| (g.clone(), k)).collect()
    };
    if vocab.is_empty() {
        return Err(Error::Data(format!("{} lists no genres", path.display())));
    }
    let vectors = dataset
        .item_ids
        .iter()
        .map(|id| {
            let mut v = vec![0.0; vocab.len()];
            if let Some(genres) = per_item.get(id) {
                for g in genres {
                    v[vocab[g]] = 1.0;
                }
            }
            v
        })
        .collect();
    dataset.item_genres = Some(vectors);
    Ok(())
}

/// Writes `kind,original,index` rows mapping dense indices back to source ids.
pub fn write_id_map(dataset: &InteractionDataset, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "kind,original,index")?;
    for (k, id) in dataset.user_ids.iter().enumerate() {
        writeln!(f, "user,{id},{k}")?;
    }
    for (k, id) in dataset.item_ids.iter().enumerate() {
        writeln!(f, "item,{id},{k}")?;
    }
    f.flush()?;
    Ok(())
}
