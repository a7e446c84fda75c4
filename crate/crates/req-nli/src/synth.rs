//! Seeded generator for the corpora committed under `data/`.
//!
//! Shapes are fixed: per-category row counts, project sizes, and gold-pair
//! counts match the published benchmark corpora, so pair-count arithmetic
//! and protocol behavior carry over. Texts are assembled from phrase banks,
//! which keeps the repository self-contained; real CSVs with the same
//! schemas can be dropped in at any time (see README).

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{ConflictProject, ConflictRequirement, Dataset, Requirement};
use crate::{rng, Result};

/// Every fixture derives from this seed; regeneration is byte-stable.
pub const FIXTURE_SEED: u64 = 19;

/// Per-category row counts for the classification corpus.
pub const CLASSIFY_COUNTS: [(&str, usize); 12] = [
    ("Functional", 255),
    ("Availability", 21),
    ("Fault Tolerance", 10),
    ("Legal", 13),
    ("Look & Feel", 38),
    ("Maintainability", 17),
    ("Operability", 62),
    ("Performance", 54),
    ("Portability", 1),
    ("Scalability", 21),
    ("Security", 66),
    ("Usability", 67),
];

/// Per-category row counts for the defect corpus.
pub const DEFECT_COUNTS: [(&str, usize); 6] = [
    ("Ambiguous", 34),
    ("Directive", 4),
    ("Non-Atomic", 28),
    ("Non-Measurable", 18),
    ("Optional", 31),
    ("Uncertain", 16),
];

const SUBJECTS: [&str; 6] = [
    "The system",
    "The system",
    "The product",
    "The application",
    "The website",
    "The platform",
];

const MODALS: [&str; 5] = ["shall", "shall", "shall", "must", "should"];

// Carrier verbs appear in every category, including ones that double as
// category vocabulary elsewhere (display, maintain, operate): shared surface
// forms are what keep single-token evidence ambiguous.
const CARRIER_VERBS: [&str; 10] = [
    "provide",
    "process",
    "handle",
    "manage",
    "support",
    "store",
    "display",
    "maintain",
    "operate on",
    "deliver",
];

const OBJECTS: [&str; 20] = [
    "user accounts",
    "customer records",
    "purchase orders",
    "invoices",
    "reports",
    "messages",
    "appointments",
    "payment details",
    "product listings",
    "search results",
    "audit logs",
    "work items",
    "notifications",
    "schedules",
    "estimates",
    "disputes",
    "insurance claims",
    "recycled parts data",
    "shipment records",
    "service requests",
];

const NEUTRAL_TAILS: [&str; 9] = [
    "",
    " on demand",
    " for each request",
    " at the end of each day",
    " when requested by the user",
    " as part of the normal workflow",
    " for all registered users",
    " during business hours",
    " in the background",
];

const FUNCTIONAL_VERBS: [&str; 36] = [
    "calculate",
    "generate",
    "export",
    "import",
    "search",
    "filter",
    "sort",
    "create",
    "merge",
    "assign",
    "route",
    "track",
    "validate",
    "submit",
    "approve",
    "reject",
    "archive",
    "retrieve",
    "print",
    "convert",
    "synchronize",
    "broadcast",
    "queue",
    "escalate",
    "register",
    "cancel",
    "renew",
    "publish",
    "allocate",
    "compare",
    "summarize",
    "forward",
    "reconcile",
    "categorize",
    "timestamp",
    "cross check",
];

struct CategoryBank {
    name: &'static str,
    clauses: &'static [&'static str],
    noise_phrases: &'static [&'static str],
}

const NFR_BANKS: [CategoryBank; 10] = [
    CategoryBank {
        name: "Availability",
        clauses: &[
            " with an uptime of at least 99 percent",
            " around the clock without unplanned outages",
            " even during scheduled maintenance windows",
            " so that the service remains available at all times",
            " with downtime limited to four hours per year",
            " whenever users attempt to reach the service",
            " without interrupting service availability",
            " and remain operational twenty four hours a day",
            " so that availability targets are met every month",
            " with redundant hosting to avoid outages",
        ],
        noise_phrases: &["service availability", "uptime targets", "outage windows"],
    },
    CategoryBank {
        name: "Fault Tolerance",
        clauses: &[
            " and recover automatically after a component failure",
            " even when a hardware fault occurs",
            " by failing over to a standby node within one minute",
            " without losing data when a crash happens",
            " and degrade gracefully under partial failure",
            " by isolating faulty modules before they spread",
            " and resume processing after an unexpected restart",
            " even if the primary database becomes unreachable",
            " by tolerating the malfunction of any single component",
            " and restore the last consistent state after a failure",
        ],
        noise_phrases: &["failover drills", "crash recovery", "fault isolation"],
    },
    CategoryBank {
        name: "Legal",
        clauses: &[
            " in compliance with the applicable data protection law",
            " as required by industry regulations",
            " according to the corporate standards for record keeping",
            " to satisfy statutory retention obligations",
            " in line with the licensing agreement",
            " as mandated by federal legislation",
            " to comply with audit regulations in every jurisdiction",
            " under the terms imposed by the regulator",
            " in accordance with contractual and legal obligations",
            " as demanded by the governing statute",
        ],
        noise_phrases: &["regulatory audits", "licensing terms", "statutory limits"],
    },
    CategoryBank {
        name: "Look & Feel",
        clauses: &[
            " using the approved corporate color scheme",
            " with a clean and modern visual layout",
            " so the interface matches the company branding",
            " with consistent fonts and icons across screens",
            " in a style that appears professional and attractive",
            " with a theme that follows the published style guide",
            " so that screens share the same look across the product",
            " with the company logo visible on every page",
            " using visual elements that appeal to younger buyers",
            " with an appearance that matches the printed catalog",
        ],
        noise_phrases: &["the corporate color scheme", "visual branding", "layout themes"],
    },
    CategoryBank {
        name: "Maintainability",
        clauses: &[
            " so that modules can be modified without affecting others",
            " in a modular structure that simplifies future changes",
            " with documentation that allows new developers to extend it",
            " so that patches can be applied without a full redeploy",
            " to let administrators upgrade components independently",
            " with configuration kept separate from code for easier updates",
            " so that defects can be corrected within one working day",
            " in a way that keeps the codebase easy to refactor",
            " so future releases can add features with minimal rework",
            " with clear interfaces that reduce the cost of upkeep",
        ],
        noise_phrases: &["patch cycles", "modular upgrades", "code documentation"],
    },
    CategoryBank {
        name: "Operability",
        clauses: &[
            " on Windows, Linux, and macOS hosts alike",
            " in any modern web browser without plugins",
            " while integrating with the existing billing environment",
            " on handheld devices used by field staff",
            " across the corporate network including remote offices",
            " when deployed inside the standard container platform",
            " alongside the legacy inventory system it must interoperate with",
            " under the operating conditions found in repair shops",
            " on the hardware already installed at customer sites",
            " while connected through the dealership network environment",
        ],
        noise_phrases: &["browser compatibility", "deployment environments", "device integration"],
    },
    CategoryBank {
        name: "Performance",
        clauses: &[
            " within two seconds for ninety five percent of requests",
            " while sustaining five hundred concurrent users",
            " with a response time below one second under normal load",
            " processing at least one thousand transactions per minute",
            " without exceeding the agreed latency budget",
            " while keeping memory usage under two gigabytes",
            " with throughput high enough for peak trading hours",
            " in under five seconds even at maximum load",
            " fast enough to refresh results in real time",
            " while meeting the stated speed targets during spikes",
        ],
        noise_phrases: &["response time", "peak load", "latency budgets"],
    },
    CategoryBank {
        name: "Scalability",
        clauses: &[
            " while scaling to twice the current user base",
            " by adding nodes to accommodate workload growth",
            " as the volume of stored records grows tenfold",
            " so that capacity can expand without redesign",
            " to handle a growing number of simultaneous sessions",
            " while the customer base increases year over year",
            " by scaling horizontally across additional servers",
            " so that future growth does not degrade the service",
            " to absorb seasonal increases in demand",
            " as new regions are added to the deployment",
        ],
        noise_phrases: &["workload growth", "capacity planning", "expanding user bases"],
    },
    CategoryBank {
        name: "Security",
        clauses: &[
            " only after the user has been authenticated",
            " while keeping credentials encrypted at rest",
            " so that unauthorized access is prevented",
            " with role based access control on every endpoint",
            " behind an encrypted channel for all transfers",
            " so that confidential data never leaves the secure zone",
            " while blocking malicious or forged requests",
            " with permissions reviewed for each protected resource",
            " after verifying the authorization level of the caller",
            " so intrusion attempts are detected and logged",
        ],
        noise_phrases: &["access control", "encrypted storage", "user authentication"],
    },
    CategoryBank {
        name: "Usability",
        clauses: &[
            " so that a novice can learn it within one hour",
            " with an intuitive workflow requiring no training",
            " in a way that first time users find easy to understand",
            " with clear feedback after every user action",
            " using symbols that users recognize without help",
            " so common tasks take no more than three clicks",
            " with built in help available on every screen",
            " so users of the prior system feel familiar immediately",
            " in plain language that avoids technical jargon",
            " with shortcuts that let experienced users work faster",
        ],
        noise_phrases: &["ease of learning", "intuitive workflows", "user training"],
    },
];

// Rows lifted into the corpus verbatim so well-known sample requirements
// resolve to the expected categories.
const SEEDED_ROWS: [(&str, &str); 4] = [
    (
        "Functional",
        "The system shall be able to call the seller or buyer to schedule an appointment",
    ),
    (
        "Legal",
        "The product shall comply with the estimatics laws relating to recycled parts usage.",
    ),
    (
        "Legal",
        "The Disputes application shall comply with the corporate standards.",
    ),
    (
        "Security",
        "The system shall prevent unauthorized connections to it or the remote IoT devices that the system is connected to.",
    ),
];

const PORTABILITY_ROW: &str =
    "The product shall be installable in a new operating environment within two days of delivery.";

/// Fraction of rows that carry one phrase borrowed from another category.
const CROSS_NOISE: f64 = 0.12;

const NOISE_TAILS: [&str; 3] = [
    " with {} in mind",
    " without impacting {}",
    " subject to {} constraints",
];

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &'a [&'a str]) -> &'a str {
    pool.choose(rng).expect("non-empty pool")
}

fn scaffold(rng: &mut ChaCha8Rng) -> (String, String) {
    (
        format!("{} {}", pick(rng, &SUBJECTS), pick(rng, &MODALS)),
        format!("{} {}", pick(rng, &CARRIER_VERBS), pick(rng, &OBJECTS)),
    )
}

fn foreign_noise(rng: &mut ChaCha8Rng, own: &str) -> String {
    let others: Vec<&CategoryBank> = NFR_BANKS.iter().filter(|b| b.name != own).collect();
    let bank = others.choose(rng).expect("other categories exist");
    let phrase = pick(rng, bank.noise_phrases);
    let tail = pick(rng, &NOISE_TAILS);
    tail.replace("{}", phrase)
}

fn unique_push(texts: &mut BTreeSet<String>, rows: &mut Vec<(String, String)>, category: &str, text: String) -> bool {
    if texts.insert(text.clone()) {
        rows.push((category.to_string(), text));
        true
    } else {
        false
    }
}

/// The classification corpus: exact per-category counts, seeded texts.
pub fn classification_rows() -> Vec<Requirement> {
    let mut rng = rng::seeded("synth", FIXTURE_SEED, b"classification");
    let mut texts: BTreeSet<String> = BTreeSet::new();
    let mut rows: Vec<(String, String)> = Vec::new();

    for (category, text) in SEEDED_ROWS {
        unique_push(&mut texts, &mut rows, category, text.to_string());
    }
    unique_push(&mut texts, &mut rows, "Portability", PORTABILITY_ROW.to_string());

    for (category, count) in CLASSIFY_COUNTS {
        let already = rows.iter().filter(|(c, _)| c == category).count();
        let mut remaining = count - already;
        while remaining > 0 {
            let (head, body) = scaffold(&mut rng);
            let text = if category == "Functional" {
                let verb = pick(&mut rng, &FUNCTIONAL_VERBS);
                let object = pick(&mut rng, &OBJECTS);
                let tail = if rng.random::<f64>() < CROSS_NOISE {
                    foreign_noise(&mut rng, category)
                } else {
                    pick(&mut rng, &NEUTRAL_TAILS).to_string()
                };
                format!("{head} {verb} {object}{tail}.")
            } else {
                let bank = NFR_BANKS
                    .iter()
                    .find(|b| b.name == category)
                    .expect("bank for every non-functional category");
                let clause = pick(&mut rng, bank.clauses);
                let noise = if rng.random::<f64>() < CROSS_NOISE {
                    foreign_noise(&mut rng, category)
                } else {
                    String::new()
                };
                format!("{head} {body}{clause}{noise}.")
            };
            if unique_push(&mut texts, &mut rows, category, text) {
                remaining -= 1;
            }
        }
    }

    rows.shuffle(&mut rng);
    rows.into_iter()
        .enumerate()
        .map(|(i, (category, text))| Requirement {
            id: format!("PR-{:03}", i + 1),
            text,
            category,
        })
        .collect()
}

const AMBIGUOUS_TAILS: [&str; 5] = [
    " as appropriate",
    " if deemed appropriate",
    " in a suitable manner",
    " where applicable",
    " whenever that seems reasonable",
];

const DIRECTIVE_TAILS: [&str; 4] = [
    " as specified in Figure 3",
    " as specified in Table 2",
    " as specified in Appendix B",
    " as specified in the attached diagram",
];

const NON_MEASURABLE_TAILS: [&str; 5] = [
    " quickly",
    " efficiently",
    " with adequate performance",
    " in a timely fashion",
    " with adequate capacity",
];

const OPTIONAL_TAILS: [&str; 5] = [
    " if possible",
    " where feasible",
    " as an optional feature",
    " when resources permit",
    " optionally",
];

const UNCERTAIN_TAILS: [&str; 5] = [
    " with limits to be determined",
    " using a method that is still TBD",
    " pending a decision on the data source",
    " presumably once per day",
    " with details to be defined later",
];

/// The defect corpus: base sentences with category-specific wording flaws.
pub fn defect_rows() -> Vec<Requirement> {
    let mut rng = rng::seeded("synth", FIXTURE_SEED, b"defects");
    let mut texts: BTreeSet<String> = BTreeSet::new();
    let mut rows: Vec<(String, String)> = Vec::new();

    for (category, count) in DEFECT_COUNTS {
        let mut remaining = count;
        while remaining > 0 {
            let head = format!("{} {}", pick(&mut rng, &SUBJECTS), pick(&mut rng, &MODALS));
            let text = match category {
                "Non-Atomic" => {
                    let v1 = pick(&mut rng, &FUNCTIONAL_VERBS);
                    let v2 = pick(&mut rng, &FUNCTIONAL_VERBS);
                    let v3 = pick(&mut rng, &FUNCTIONAL_VERBS);
                    let o1 = pick(&mut rng, &OBJECTS);
                    let o2 = pick(&mut rng, &OBJECTS);
                    let o3 = pick(&mut rng, &OBJECTS);
                    match rng.random_range(0..3) {
                        0 => format!("{head} {v1} {o1} and shall also {v2} {o2}."),
                        1 => format!("{head} {v1} {o1}, {v2} {o2}, and {v3} {o3}."),
                        _ => format!("{head} both {v1} {o1} and {v2} {o2} as well as {v3} {o3}."),
                    }
                }
                _ => {
                    let verb = pick(&mut rng, &FUNCTIONAL_VERBS);
                    let object = pick(&mut rng, &OBJECTS);
                    let tail = match category {
                        "Ambiguous" => pick(&mut rng, &AMBIGUOUS_TAILS),
                        "Directive" => DIRECTIVE_TAILS[remaining - 1],
                        "Non-Measurable" => pick(&mut rng, &NON_MEASURABLE_TAILS),
                        "Optional" => pick(&mut rng, &OPTIONAL_TAILS),
                        "Uncertain" => pick(&mut rng, &UNCERTAIN_TAILS),
                        other => unreachable!("unknown defect category {other}"),
                    };
                    format!("{head} {verb} {object}{tail}.")
                }
            };
            if unique_push(&mut texts, &mut rows, category, text) {
                remaining -= 1;
            }
        }
    }

    rows.shuffle(&mut rng);
    rows.into_iter()
        .enumerate()
        .map(|(i, (category, text))| Requirement {
            id: format!("DF-{:03}", i + 1),
            text,
            category,
        })
        .collect()
}

/// Hypothesis texts per task and category.
///
/// The Functional and Legal descriptions follow well-known published
/// verbalizations for those classes; the remaining descriptions are authored
/// in the same style.
pub fn verbalization_rows() -> Vec<(&'static str, &'static str, &'static str)> {
    vec![
        ("classify", "Availability", "This requirement describes the extent to which the system must remain operational and accessible to its users over time."),
        ("classify", "Fault Tolerance", "This requirement describes how the system must keep working or recover when parts of it fail or misbehave."),
        ("classify", "Functional", "This requirement describes the functionality of the system, actions taken by the system or actions the users of the system should be able to take using the system."),
        ("classify", "Legal", "This requirement describes laws and standards related to the software, its uses, and its users."),
        ("classify", "Look & Feel", "This requirement describes the visual appearance and style of the system and its user interface."),
        ("classify", "Maintainability", "This requirement describes how the system is to be modified, extended, corrected, or kept up to date after delivery."),
        ("classify", "Operability", "This requirement describes the environments, platforms, and external systems the software must operate with or run on."),
        ("classify", "Performance", "This requirement describes how fast, how responsive, or with what capacity the system must carry out its work."),
        ("classify", "Portability", "This requirement describes how the system can be moved to or installed in different operating environments."),
        ("classify", "Scalability", "This requirement describes how the system must grow to handle increasing numbers of users, data, or workload."),
        ("classify", "Security", "This requirement describes how the system protects data and functionality from unauthorized access, disclosure, or attack."),
        ("classify", "Usability", "This requirement describes how easily users can learn, operate, and understand the system."),
        ("defects", "Ambiguous", "This requirement is ambiguous because vague wording such as appropriate, suitable, applicable, or reasonable can be interpreted in more than one way."),
        ("defects", "Directive", "This requirement is a directive because its content is only specified in an external figure, table, appendix, or diagram."),
        ("defects", "Non-Atomic", "This requirement is non-atomic because it chains several separate requirements into one statement with connectors such as and, also, or as well."),
        ("defects", "Non-Measurable", "This requirement is non-measurable because words like quickly, efficiently, adequate, or timely give no quantifiable criteria to verify it."),
        ("defects", "Optional", "This requirement is optional because phrasing such as if possible, where feasible, or optionally leaves a choice about whether it must be satisfied at all."),
        ("defects", "Uncertain", "This requirement is uncertain because details are still TBD, pending, presumably settled, or to be determined and defined later."),
    ]
}

/// One conflict cluster: `positives` rows enable a feature, `negatives` rows
/// forbid it, and every enable/forbid pair is a gold conflict.
struct Cluster {
    feature: &'static str,
    positives: usize,
    negatives: usize,
}

struct ProjectSpec {
    name: &'static str,
    n_reqs: usize,
    clusters: &'static [Cluster],
    objects: &'static [&'static str],
    verbs: &'static [&'static str],
}

// Feature nouns are deliberately shared across two projects each, so a
// held-out project's features are in-vocabulary for models trained on the
// remaining projects.
static PROJECT_SPECS: [ProjectSpec; 7] = [
    ProjectSpec {
        name: "broker",
        n_reqs: 46,
        clusters: &[
            Cluster { feature: "virtual circuits for PBX accounts", positives: 3, negatives: 3 },
            Cluster { feature: "instant refunds", positives: 2, negatives: 2 },
        ],
        objects: &[
            "call records",
            "trunk lines",
            "voice mailboxes",
            "subscriber accounts",
            "dial plans",
            "conference bridges",
            "billing statements",
            "rate tables",
            "number ranges",
            "switch configurations",
        ],
        verbs: &["provision", "route", "bill", "meter", "suspend", "record", "audit"],
    },
    ProjectSpec {
        name: "promise-p2",
        n_reqs: 65,
        clusters: &[
            Cluster { feature: "guest access", positives: 3, negatives: 3 },
            Cluster { feature: "instant refunds", positives: 2, negatives: 2 },
        ],
        objects: &[
            "shopping carts",
            "product pages",
            "order confirmations",
            "discount codes",
            "customer reviews",
            "wish lists",
            "payment receipts",
            "delivery addresses",
            "loyalty points",
            "seasonal catalogs",
        ],
        verbs: &["show", "update", "confirm", "apply", "collect", "publish", "verify"],
    },
    ProjectSpec {
        name: "promise-p6",
        n_reqs: 95,
        clusters: &[Cluster { feature: "automatic renewals", positives: 2, negatives: 7 }],
        objects: &[
            "patient charts",
            "appointment slots",
            "lab results",
            "referral letters",
            "treatment plans",
            "ward schedules",
            "medication lists",
            "discharge summaries",
            "consent forms",
            "insurance approvals",
        ],
        verbs: &["file", "review", "share", "archive", "annotate", "transfer", "schedule"],
    },
    ProjectSpec {
        name: "promise-p10",
        n_reqs: 69,
        clusters: &[
            Cluster { feature: "guest access", positives: 3, negatives: 3 },
            Cluster { feature: "bulk imports", positives: 2, negatives: 2 },
        ],
        objects: &[
            "delivery routes",
            "driver rosters",
            "fuel logs",
            "warehouse slots",
            "freight manifests",
            "vehicle inspections",
            "pickup windows",
            "tracking numbers",
            "customs forms",
            "depot inventories",
        ],
        verbs: &["plan", "dispatch", "scan", "weigh", "optimize", "log", "reassign"],
    },
    ProjectSpec {
        name: "coffee-machine",
        n_reqs: 21,
        clusters: &[
            Cluster { feature: "silent hours", positives: 5, negatives: 4 },
            Cluster { feature: "manual overrides", positives: 3, negatives: 3 },
        ],
        objects: &[
            "the water tank",
            "the bean hopper",
            "the drip tray",
            "the milk frother",
            "brewing profiles",
            "the descaling cycle",
            "cup sensors",
            "the heating element",
        ],
        verbs: &["monitor", "heat", "rinse", "calibrate", "refill", "signal", "prime"],
    },
    ProjectSpec {
        name: "library",
        n_reqs: 109,
        clusters: &[Cluster { feature: "automatic renewals", positives: 4, negatives: 5 }],
        objects: &[
            "borrower cards",
            "loan periods",
            "catalog entries",
            "reading rooms",
            "reservation queues",
            "overdue fines",
            "interlibrary requests",
            "periodical shelves",
            "study desks",
            "acquisition lists",
        ],
        verbs: &["issue", "extend", "catalog", "reserve", "waive", "recall", "shelve"],
    },
    ProjectSpec {
        name: "etcs",
        n_reqs: 64,
        clusters: &[
            Cluster { feature: "manual overrides", positives: 6, negatives: 4 },
            Cluster { feature: "virtual circuits for PBX accounts", positives: 2, negatives: 5 },
        ],
        objects: &[
            "movement authorities",
            "speed profiles",
            "balise messages",
            "braking curves",
            "track sections",
            "onboard displays",
            "radio block messages",
            "odometer readings",
            "trackside signals",
            "driver acknowledgements",
        ],
        verbs: &["supervise", "transmit", "enforce", "compute", "acknowledge", "relay", "limit"],
    },
];

const ENABLE_TEMPLATES: [&str; 6] = [
    "{s} shall allow {f} for every account",
    "{s} shall keep {f} enabled at all times",
    "{s} shall support {f} during normal operation",
    "{s} shall activate {f} automatically",
    "{s} shall offer {f} to all users",
    "{s} shall permit {f} on request",
];

const FORBID_TEMPLATES: [&str; 7] = [
    "{s} shall never enable {f}",
    "{s} shall not provide {f} under any circumstances",
    "The use of {f} shall be prohibited",
    "{s} shall deactivate {f} when detected",
    "{s} shall reject any request for {f}",
    "It shall be forbidden to use {f}",
    "{s} shall block {f} for all accounts",
];

// The canonical conflicting pair seeded into the broker project verbatim.
const BROKER_FORBID: &str = "It shall be forbidden for PBX accounts to have virtual circuits.";
const BROKER_ENABLE: &str =
    "The system shall deactivate virtual circuits for PBX accounts that do not pay for the service.";

/// All seven conflict projects, shapes exact, gold pairs from the clusters.
pub fn conflict_projects() -> Vec<ConflictProject> {
    PROJECT_SPECS.iter().map(build_project).collect()
}

fn build_project(spec: &ProjectSpec) -> ConflictProject {
    let mut rng = rng::seeded("synth", FIXTURE_SEED, spec.name.as_bytes());
    let mut texts: BTreeSet<String> = BTreeSet::new();
    let mut rows: Vec<String> = Vec::new();
    // (enable row index, forbid row index) per cluster, resolved to ids later
    let mut gold: Vec<(usize, usize)> = Vec::new();

    for cluster in spec.clusters {
        let mut enables = Vec::new();
        let mut forbids = Vec::new();
        for i in 0..cluster.positives {
            let text = if spec.name == "broker" && cluster.feature.starts_with("virtual") && i == 0
            {
                BROKER_ENABLE.to_string()
            } else {
                let template = ENABLE_TEMPLATES[i % ENABLE_TEMPLATES.len()];
                template
                    .replace("{s}", pick(&mut rng, &SUBJECTS))
                    .replace("{f}", cluster.feature)
                    + "."
            };
            if !texts.insert(text.clone()) {
                continue;
            }
            enables.push(rows.len());
            rows.push(text);
        }
        for i in 0..cluster.negatives {
            let text = if spec.name == "broker" && cluster.feature.starts_with("virtual") && i == 0
            {
                BROKER_FORBID.to_string()
            } else {
                let template = FORBID_TEMPLATES[i % FORBID_TEMPLATES.len()];
                template
                    .replace("{s}", pick(&mut rng, &SUBJECTS))
                    .replace("{f}", cluster.feature)
                    + "."
            };
            if !texts.insert(text.clone()) {
                continue;
            }
            forbids.push(rows.len());
            rows.push(text);
        }
        assert_eq!(enables.len(), cluster.positives, "enable templates exhausted");
        assert_eq!(forbids.len(), cluster.negatives, "forbid templates exhausted");
        for &e in &enables {
            for &f in &forbids {
                gold.push((e, f));
            }
        }
        // one same-topic filler per cluster: mentions the feature once,
        // carries no polarity, so it pairs as a hard negative
        if rows.len() < spec.n_reqs {
            let text = format!(
                "{} shall log all changes to {}.",
                pick(&mut rng, &SUBJECTS),
                cluster.feature
            );
            if texts.insert(text.clone()) {
                rows.push(text);
            }
        }
    }

    while rows.len() < spec.n_reqs {
        let verb = pick(&mut rng, spec.verbs);
        let object = pick(&mut rng, spec.objects);
        let tail = pick(&mut rng, &NEUTRAL_TAILS);
        let text = format!(
            "{} {} {verb} {object}{tail}.",
            pick(&mut rng, &SUBJECTS),
            pick(&mut rng, &MODALS)
        );
        if texts.insert(text.clone()) {
            rows.push(text);
        }
    }

    let expected_gold: usize = spec
        .clusters
        .iter()
        .map(|c| c.positives * c.negatives)
        .sum();
    assert_eq!(gold.len(), expected_gold, "{}: gold pair count", spec.name);
    assert_eq!(rows.len(), spec.n_reqs, "{}: requirement count", spec.name);

    // shuffle positions, then assign sequential ids in file order
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.shuffle(&mut rng);
    let mut position = vec![0usize; rows.len()];
    for (new_pos, &old) in order.iter().enumerate() {
        position[old] = new_pos;
    }
    let id_of = |old: usize| format!("R{}", position[old] + 1);

    let mut requirements: Vec<ConflictRequirement> = vec![
        ConflictRequirement {
            id: String::new(),
            text: String::new(),
        };
        rows.len()
    ];
    for (old, text) in rows.into_iter().enumerate() {
        requirements[position[old]] = ConflictRequirement {
            id: id_of(old),
            text,
        };
    }
    let gold_pairs: Vec<(String, String)> = gold
        .into_iter()
        .map(|(a, b)| {
            let (ia, ib) = (id_of(a), id_of(b));
            if ia <= ib {
                (ia, ib)
            } else {
                (ib, ia)
            }
        })
        .collect();

    ConflictProject {
        name: spec.name.to_string(),
        requirements,
        gold_pairs,
    }
}

/// Write every fixture under `dir`: classification.csv, defects.csv,
/// verbalizations.csv, and conflicts/<project>_{reqs,pairs}.csv.
pub fn write_fixtures(dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir.join("conflicts"))?;

    let classify = classification_rows();
    crate::corpus::write_dataset_csv(
        dir.join("classification.csv"),
        &Dataset::from_rows(classify),
        "category",
    )?;

    let defects = defect_rows();
    crate::corpus::write_dataset_csv(
        dir.join("defects.csv"),
        &Dataset::from_rows(defects),
        "defect_category",
    )?;

    let mut writer = csv::Writer::from_path(dir.join("verbalizations.csv"))?;
    writer.write_record(["task", "category", "description"])?;
    for (task, category, description) in verbalization_rows() {
        writer.write_record([task, category, description])?;
    }
    writer.flush()?;

    for project in conflict_projects() {
        let base = dir.join("conflicts");
        let mut writer = csv::Writer::from_path(base.join(format!("{}_reqs.csv", project.name)))?;
        writer.write_record(["id", "text"])?;
        for r in &project.requirements {
            writer.write_record([&r.id, &r.text])?;
        }
        writer.flush()?;
        let mut writer = csv::Writer::from_path(base.join(format!("{}_pairs.csv", project.name)))?;
        writer.write_record(["id_a", "id_b"])?;
        for (a, b) in &project.gold_pairs {
            writer.write_record([a, b])?;
        }
        writer.flush()?;
    }
    Ok(())
}

/// Names of the generated conflict projects, in fixture order.
pub fn conflict_project_names() -> Vec<&'static str> {
    PROJECT_SPECS.iter().map(|s| s.name).collect()
}
