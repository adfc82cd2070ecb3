//! Synthetic KDD-format traffic.
//!
//! Per-label templates reproduce the characteristic shape of each attack in
//! the real corpus (smurf floods are 1032-byte ICMP echo replies at count 511,
//! neptune is a SYN flood of S0 connections, and so on) with seeded jitter.
//! Label proportions follow the 10% file. Used by tests, examples and
//! desk-scale smoke runs when the real file is not at hand.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::kdd::{parse_dataset, sha256_hex, Dataset, IngestError, FEATURE_NAMES, NUM_FEATURES};

/// Per-label record counts of the 10% file.
pub const LABEL_COUNTS: [(&str, usize); 23] = [
    ("normal", 97_278),
    ("smurf", 280_790),
    ("neptune", 107_201),
    ("back", 2_203),
    ("teardrop", 979),
    ("pod", 264),
    ("land", 21),
    ("satan", 1_589),
    ("ipsweep", 1_247),
    ("portsweep", 1_040),
    ("nmap", 231),
    ("warezclient", 1_020),
    ("guess_passwd", 53),
    ("warezmaster", 20),
    ("imap", 12),
    ("ftp_write", 8),
    ("multihop", 7),
    ("phf", 4),
    ("spy", 2),
    ("buffer_overflow", 30),
    ("rootkit", 10),
    ("loadmodule", 9),
    ("perl", 3),
];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub records: usize,
    pub seed: u64,
    /// Floor on each label's count so rare classes exist in small samples.
    pub min_per_label: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            records: 10_000,
            seed: 0,
            min_per_label: 0,
        }
    }
}

impl SynthConfig {
    pub fn new(records: usize, seed: u64) -> Self {
        Self {
            records,
            seed,
            min_per_label: 0,
        }
    }
}

fn col(name: &str) -> usize {
    FEATURE_NAMES.iter().position(|&n| n == name).expect("known column")
}

/// One connection under construction.
struct Conn {
    fields: Vec<String>,
}

impl Conn {
    fn new(protocol: &str, service: &str, flag: &str) -> Self {
        let mut fields = vec!["0".to_string(); NUM_FEATURES];
        for name in FEATURE_NAMES.iter().filter(|n| n.ends_with("_rate")) {
            fields[col(name)] = "0.00".into();
        }
        fields[1] = protocol.into();
        fields[2] = service.into();
        fields[3] = flag.into();
        Self { fields }
    }

    fn int(&mut self, name: &str, v: u64) -> &mut Self {
        self.fields[col(name)] = v.to_string();
        self
    }

    fn rate(&mut self, name: &str, v: f64) -> &mut Self {
        self.fields[col(name)] = format!("{:.2}", v.clamp(0.0, 1.0));
        self
    }

    fn line(&self, label: &str) -> String {
        format!("{},{}.", self.fields.join(","), label)
    }
}

fn near(rng: &mut ChaCha8Rng, centre: f64, spread: f64) -> f64 {
    (centre + rng.gen_range(-spread..=spread)).clamp(0.0, 1.0)
}

/// Roughly log-uniform integer in `[lo, hi]`.
fn log_uniform(rng: &mut ChaCha8Rng, lo: u64, hi: u64) -> u64 {
    let (a, b) = ((lo.max(1) as f64).ln(), (hi.max(1) as f64).ln());
    rng.gen_range(a..=b).exp().round() as u64
}

fn pick<'a>(rng: &mut ChaCha8Rng, items: &[&'a str]) -> &'a str {
    items[rng.gen_range(0..items.len())]
}

fn normal(rng: &mut ChaCha8Rng) -> Conn {
    let roll: f64 = rng.gen();
    let mut c;
    if roll < 0.60 {
        c = Conn::new("tcp", "http", "SF");
        c.int("src_bytes", log_uniform(rng, 150, 350))
            .int("dst_bytes", log_uniform(rng, 300, 20_000))
            .int("logged_in", 1);
    } else if roll < 0.75 {
        c = Conn::new("tcp", pick(rng, &["smtp", "ftp_data", "ftp", "telnet"]), "SF");
        c.int("duration", if rng.gen_bool(0.3) { rng.gen_range(1..300) } else { 0 })
            .int("src_bytes", log_uniform(rng, 100, 5_000))
            .int("dst_bytes", log_uniform(rng, 100, 5_000))
            .int("logged_in", 1);
        if rng.gen_bool(0.1) {
            c.int("hot", rng.gen_range(1..3));
        }
    } else if roll < 0.93 {
        c = Conn::new("udp", pick(rng, &["domain_u", "private", "ntp_u", "other"]), "SF");
        c.int("src_bytes", log_uniform(rng, 30, 150))
            .int("dst_bytes", log_uniform(rng, 30, 150));
    } else if roll < 0.97 {
        c = Conn::new("icmp", pick(rng, &["ecr_i", "eco_i", "urp_i"]), "SF");
        c.int("src_bytes", log_uniform(rng, 8, 600));
    } else {
        // Failed or reset legitimate connections.
        c = Conn::new("tcp", pick(rng, &["http", "private", "auth", "other"]), pick(rng, &["REJ", "RSTO", "S0"]));
        c.rate("rerror_rate", near(rng, 0.5, 0.5));
    }
    let count = rng.gen_range(1..25);
    c.int("count", count)
        .int("srv_count", rng.gen_range(count..count + 20))
        .rate("same_srv_rate", near(rng, 0.97, 0.03))
        .rate("diff_srv_rate", near(rng, 0.02, 0.02))
        .rate("srv_diff_host_rate", near(rng, 0.1, 0.1))
        .int("dst_host_count", rng.gen_range(1..256))
        .int("dst_host_srv_count", rng.gen_range(100..256))
        .rate("dst_host_same_srv_rate", near(rng, 0.9, 0.1))
        .rate("dst_host_diff_srv_rate", near(rng, 0.02, 0.02))
        .rate("dst_host_same_src_port_rate", near(rng, 0.05, 0.05))
        .rate("dst_host_srv_diff_host_rate", near(rng, 0.03, 0.03));
    c
}

fn flood_host(c: &mut Conn, rng: &mut ChaCha8Rng) {
    c.int("count", rng.gen_range(450..512))
        .int("srv_count", rng.gen_range(450..512))
        .rate("same_srv_rate", 1.0)
        .int("dst_host_count", 255)
        .int("dst_host_srv_count", 255)
        .rate("dst_host_same_srv_rate", 1.0)
        .rate("dst_host_same_src_port_rate", near(rng, 0.98, 0.02));
}

fn template(label: &str, rng: &mut ChaCha8Rng) -> Conn {
    let mut c;
    match label {
        "normal" => return normal(rng),
        "smurf" => {
            c = Conn::new("icmp", "ecr_i", "SF");
            c.int("src_bytes", *[1032u64, 520].choose(rng).unwrap());
            flood_host(&mut c, rng);
        }
        "neptune" => {
            c = Conn::new("tcp", pick(rng, &["private", "other", "telnet", "finger", "http"]), pick(rng, &["S0", "S0", "REJ"]));
            let count = rng.gen_range(100..300);
            c.int("count", count)
                .int("srv_count", rng.gen_range(1..25))
                .rate("serror_rate", near(rng, 0.98, 0.02))
                .rate("srv_serror_rate", near(rng, 0.98, 0.02))
                .rate("same_srv_rate", near(rng, 0.05, 0.04))
                .rate("diff_srv_rate", near(rng, 0.06, 0.03))
                .int("dst_host_count", 255)
                .int("dst_host_srv_count", rng.gen_range(1..25))
                .rate("dst_host_same_srv_rate", near(rng, 0.05, 0.04))
                .rate("dst_host_diff_srv_rate", near(rng, 0.07, 0.03))
                .rate("dst_host_serror_rate", near(rng, 0.98, 0.02))
                .rate("dst_host_srv_serror_rate", near(rng, 0.98, 0.02));
        }
        "back" => {
            c = Conn::new("tcp", "http", "SF");
            c.int("src_bytes", 54_540)
                .int("dst_bytes", rng.gen_range(7_300..8_400))
                .int("hot", 2)
                .int("num_compromised", 1)
                .int("logged_in", 1)
                .int("count", rng.gen_range(1..10))
                .int("srv_count", rng.gen_range(1..10))
                .rate("same_srv_rate", 1.0)
                .int("dst_host_count", rng.gen_range(50..256))
                .int("dst_host_srv_count", rng.gen_range(50..256))
                .rate("dst_host_same_srv_rate", 1.0);
        }
        "teardrop" => {
            c = Conn::new("udp", "private", "SF");
            c.int("src_bytes", 28)
                .int("wrong_fragment", 3)
                .int("count", rng.gen_range(1..100))
                .int("srv_count", rng.gen_range(1..100))
                .rate("same_srv_rate", 1.0)
                .int("dst_host_count", rng.gen_range(1..256))
                .int("dst_host_srv_count", rng.gen_range(1..150));
        }
        "pod" => {
            c = Conn::new("icmp", "ecr_i", "SF");
            c.int("src_bytes", 1_480)
                .int("wrong_fragment", 1)
                .int("count", rng.gen_range(1..5))
                .int("srv_count", rng.gen_range(1..5))
                .rate("same_srv_rate", 1.0)
                .int("dst_host_count", rng.gen_range(1..256))
                .int("dst_host_srv_count", rng.gen_range(1..256));
        }
        "land" => {
            c = Conn::new("tcp", pick(rng, &["finger", "telnet", "http"]), "S0");
            c.int("land", 1)
                .int("count", 1)
                .int("srv_count", 1)
                .rate("serror_rate", 1.0)
                .rate("srv_serror_rate", 1.0)
                .rate("same_srv_rate", 1.0)
                .int("dst_host_count", rng.gen_range(1..20))
                .int("dst_host_srv_count", rng.gen_range(1..20))
                .rate("dst_host_serror_rate", 1.0);
        }
        "satan" => {
            c = Conn::new("tcp", pick(rng, &["other", "private", "finger", "link", "ftp"]), pick(rng, &["REJ", "RSTO", "SF"]));
            c.int("count", rng.gen_range(1..500))
                .int("srv_count", rng.gen_range(1..5))
                .rate("rerror_rate", near(rng, 0.85, 0.15))
                .rate("srv_rerror_rate", near(rng, 0.85, 0.15))
                .rate("same_srv_rate", near(rng, 0.05, 0.05))
                .rate("diff_srv_rate", near(rng, 0.7, 0.3))
                .int("dst_host_count", 255)
                .int("dst_host_srv_count", rng.gen_range(1..10))
                .rate("dst_host_diff_srv_rate", near(rng, 0.6, 0.4))
                .rate("dst_host_rerror_rate", near(rng, 0.85, 0.15))
                .rate("dst_host_srv_rerror_rate", near(rng, 0.85, 0.15));
        }
        "ipsweep" => {
            c = Conn::new("icmp", pick(rng, &["eco_i", "eco_i", "ecr_i"]), "SF");
            c.int("src_bytes", *[8u64, 18].choose(rng).unwrap())
                .int("count", rng.gen_range(1..3))
                .int("srv_count", rng.gen_range(1..50))
                .rate("same_srv_rate", 1.0)
                .rate("srv_diff_host_rate", near(rng, 0.9, 0.1))
                .int("dst_host_count", rng.gen_range(1..100))
                .int("dst_host_srv_count", rng.gen_range(1..100))
                .rate("dst_host_same_srv_rate", 1.0)
                .rate("dst_host_same_src_port_rate", 1.0)
                .rate("dst_host_srv_diff_host_rate", near(rng, 0.5, 0.5));
        }
        "portsweep" => {
            c = Conn::new("tcp", pick(rng, &["private", "other"]), pick(rng, &["REJ", "RSTR", "SH"]));
            c.int("duration", if rng.gen_bool(0.3) { rng.gen_range(1_000..42_000) } else { 0 })
                .int("count", rng.gen_range(1..3))
                .int("srv_count", rng.gen_range(1..3))
                .rate("rerror_rate", near(rng, 0.5, 0.5))
                .rate("srv_rerror_rate", 1.0)
                .rate("same_srv_rate", 1.0)
                .int("dst_host_count", rng.gen_range(1..256))
                .int("dst_host_srv_count", rng.gen_range(1..10))
                .rate("dst_host_diff_srv_rate", near(rng, 0.8, 0.2))
                .rate("dst_host_same_src_port_rate", 1.0)
                .rate("dst_host_rerror_rate", near(rng, 0.5, 0.5))
                .rate("dst_host_srv_rerror_rate", 1.0);
        }
        "nmap" => {
            let proto = pick(rng, &["tcp", "udp", "icmp"]);
            c = Conn::new(proto, if proto == "icmp" { "eco_i" } else { "private" }, pick(rng, &["SF", "S0", "REJ"]));
            c.int("src_bytes", rng.gen_range(0..40))
                .int("count", rng.gen_range(1..5))
                .int("srv_count", rng.gen_range(1..5))
                .rate("same_srv_rate", near(rng, 0.5, 0.5))
                .int("dst_host_count", rng.gen_range(1..256))
                .int("dst_host_srv_count", rng.gen_range(1..50))
                .rate("dst_host_diff_srv_rate", near(rng, 0.5, 0.5))
                .rate("dst_host_same_src_port_rate", near(rng, 0.8, 0.2))
                .rate("dst_host_srv_diff_host_rate", near(rng, 0.5, 0.5));
        }
        "warezclient" | "warezmaster" => {
            c = Conn::new("tcp", pick(rng, &["ftp_data", "ftp"]), "SF");
            c.int("duration", rng.gen_range(0..2_000))
                .int("src_bytes", log_uniform(rng, 100_000, 5_000_000))
                .int("hot", rng.gen_range(2..30))
                .int("logged_in", 1)
                .int("is_guest_login", 1)
                .int("count", 1)
                .int("srv_count", 1)
                .rate("same_srv_rate", 1.0)
                .int("dst_host_count", rng.gen_range(1..50))
                .int("dst_host_srv_count", rng.gen_range(1..50))
                .rate("dst_host_same_srv_rate", near(rng, 0.5, 0.5));
            if label == "warezmaster" {
                c.int("dst_bytes", log_uniform(rng, 1_000_000, 6_000_000)).int("src_bytes", rng.gen_range(0..500));
            }
        }
        "guess_passwd" => {
            c = Conn::new("tcp", pick(rng, &["telnet", "pop_3"]), "RSTO");
            c.int("src_bytes", rng.gen_range(100..130))
                .int("dst_bytes", rng.gen_range(150..200))
                .int("num_failed_logins", 1)
                .int("count", 1)
                .int("srv_count", 1)
                .rate("rerror_rate", 1.0)
                .rate("srv_rerror_rate", 1.0)
                .rate("same_srv_rate", 1.0)
                .int("dst_host_count", rng.gen_range(1..60))
                .int("dst_host_srv_count", rng.gen_range(1..60))
                .rate("dst_host_rerror_rate", near(rng, 0.8, 0.2));
        }
        "imap" | "ftp_write" | "multihop" | "phf" | "spy" => {
            let service = match label {
                "imap" => "imap4",
                "phf" => "http",
                "ftp_write" => "ftp",
                _ => pick(rng, &["telnet", "ftp_data"]),
            };
            c = Conn::new("tcp", service, pick(rng, &["SF", "SH", "S3"]));
            c.int("duration", rng.gen_range(0..2_000))
                .int("src_bytes", log_uniform(rng, 50, 20_000))
                .int("dst_bytes", log_uniform(rng, 50, 20_000))
                .int("hot", rng.gen_range(0..5))
                .int("logged_in", 1)
                .int("num_file_creations", rng.gen_range(0..3))
                .int("num_access_files", rng.gen_range(0..2))
                .int("count", rng.gen_range(1..5))
                .int("srv_count", rng.gen_range(1..5))
                .int("dst_host_count", rng.gen_range(1..30))
                .int("dst_host_srv_count", rng.gen_range(1..30));
        }
        "buffer_overflow" | "rootkit" | "loadmodule" | "perl" => {
            c = Conn::new("tcp", pick(rng, &["telnet", "ftp_data", "login"]), "SF");
            c.int("duration", rng.gen_range(20..300))
                .int("src_bytes", log_uniform(rng, 500, 5_000))
                .int("dst_bytes", log_uniform(rng, 2_000, 30_000))
                .int("hot", rng.gen_range(1..6))
                .int("logged_in", 1)
                .int("num_compromised", rng.gen_range(0..3))
                .int("root_shell", u64::from(rng.gen_bool(0.7)))
                .int("num_root", rng.gen_range(0..4))
                .int("num_file_creations", rng.gen_range(0..4))
                .int("num_shells", rng.gen_range(0..2))
                .int("count", rng.gen_range(1..3))
                .int("srv_count", rng.gen_range(1..3))
                .rate("same_srv_rate", 1.0)
                .int("dst_host_count", rng.gen_range(1..20))
                .int("dst_host_srv_count", rng.gen_range(1..20));
        }
        other => unreachable!("no template for {other}"),
    }
    c
}

/// Per-label record counts for `cfg.records` total, proportional to the 10%
/// file and floored at `min_per_label`.
pub fn label_plan(cfg: &SynthConfig) -> Vec<(&'static str, usize)> {
    let total: usize = LABEL_COUNTS.iter().map(|(_, n)| n).sum();
    LABEL_COUNTS
        .iter()
        .map(|&(label, n)| {
            let share = (n as f64 * cfg.records as f64 / total as f64).round() as usize;
            (label, share.max(cfg.min_per_label))
        })
        .collect()
}

/// KDD-format lines, labels interleaved in seeded random order.
pub fn generate_lines(cfg: &SynthConfig) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut labels: Vec<&str> = label_plan(cfg)
        .into_iter()
        .flat_map(|(label, n)| std::iter::repeat_n(label, n))
        .collect();
    labels.shuffle(&mut rng);
    labels.into_iter().map(|l| template(l, &mut rng).line(l)).collect()
}

pub fn generate_text(cfg: &SynthConfig) -> String {
    let mut text = generate_lines(cfg).join("\n");
    text.push('\n');
    text
}

/// Generated records parsed into a dataset whose checksum is that of the
/// generated text.
pub fn generate_dataset(cfg: &SynthConfig) -> Result<Dataset, IngestError> {
    let text = generate_text(cfg);
    let checksum = sha256_hex(text.as_bytes());
    parse_dataset(&text, &format!("synthetic:{}:{}", cfg.records, cfg.seed), checksum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kdd::{parse_record, Category};

    #[test]
    fn counts_sum_to_ten_percent_total() {
        assert_eq!(LABEL_COUNTS.iter().map(|(_, n)| n).sum::<usize>(), 494_021);
    }

    #[test]
    fn every_line_parses_and_round_trips() {
        let cfg = SynthConfig {
            records: 2_000,
            seed: 3,
            min_per_label: 2,
        };
        for line in generate_lines(&cfg) {
            let rec = parse_record(&line).unwrap_or_else(|e| panic!("{line}: {e}"));
            assert_eq!(rec.to_line(), line);
        }
    }

    #[test]
    fn seeded_and_proportional() {
        let cfg = SynthConfig::new(5_000, 9);
        assert_eq!(generate_text(&cfg), generate_text(&cfg));
        assert_ne!(generate_text(&cfg), generate_text(&SynthConfig::new(5_000, 10)));
        let ds = generate_dataset(&cfg).unwrap();
        let counts = ds.category_counts();
        let dos = counts[&Category::DoS] as f64 / ds.len() as f64;
        assert!((dos - 0.79).abs() < 0.02, "{dos}");
    }
}
