//! Least fixpoint of the derivation rules.

use std::collections::BTreeSet;

use super::statement::{Key, Statement, View};
use crate::naming::DomainName;

/// `LogTrust(L, S)` and `Proof(L, X, N, I)` give `Compliant(X, N, S, I)`.
fn rule_log(known: &BTreeSet<Statement>, out: &mut Vec<Statement>) {
    for s in known {
        let Statement::LogTrust { log, cas } = s else {
            continue;
        };
        for p in known {
            if let Statement::Proof {
                log: pl,
                key,
                name,
                interval,
            } = p
            {
                if pl == log {
                    out.push(Statement::Compliant {
                        key: key.clone(),
                        name: name.clone(),
                        cas: cas.clone(),
                        interval: *interval,
                    });
                }
            }
        }
    }
}

/// Two compliance statements for the same name combine their CA sets over
/// the common interval; the second may be for the null key.
fn rule_combine(known: &BTreeSet<Statement>, out: &mut Vec<Statement>) {
    for a in known {
        let Statement::Compliant {
            key: k1,
            name: n1,
            cas: s1,
            interval: i1,
        } = a
        else {
            continue;
        };
        for b in known {
            let Statement::Compliant {
                key: k2,
                name: n2,
                cas: s2,
                interval: i2,
            } = b
            else {
                continue;
            };
            if n1 != n2 || !(k2 == k1 || *k2 == Key::Null) {
                continue;
            }
            if let Some(i) = i1.intersect(i2) {
                out.push(Statement::Compliant {
                    key: k1.clone(),
                    name: n1.clone(),
                    cas: s1.union(s2).cloned().collect(),
                    interval: i,
                });
            }
        }
    }
}

/// An authentic issuer, its certificate for a subject, and the subject's
/// compliance with every highly trusted CA for its name make the subject
/// authentic.
fn rule_delegate(view: &View, known: &BTreeSet<Statement>, out: &mut Vec<Statement>) {
    for a in known {
        let Statement::Aut {
            key: x1,
            realm: r1,
            interval: i1,
            ..
        } = a
        else {
            continue;
        };
        for c in known {
            let Statement::Cert {
                issuer,
                subject: x2,
                name: n2,
                realm: r2,
                interval: i2,
            } = c
            else {
                continue;
            };
            if issuer != x1 || !r1.contains(n2) {
                continue;
            }
            let Some(i12) = i1.intersect(i2) else {
                continue;
            };
            let f = view.f(n2);
            for p in known {
                let Statement::Compliant {
                    key,
                    name,
                    cas,
                    interval: i3,
                } = p
                else {
                    continue;
                };
                if key != x2 || name != n2 || !f.is_subset(cas) {
                    continue;
                }
                if let Some(i) = i12.intersect(i3) {
                    out.push(Statement::Aut {
                        key: x2.clone(),
                        name: n2.clone(),
                        realm: r1.intersect(r2),
                        interval: i,
                    });
                }
            }
        }
    }
}

/// Every statement derivable from the view, including the view itself.
pub fn derive_closure(view: &View) -> BTreeSet<Statement> {
    let mut known = view.statements.clone();
    loop {
        let mut new = Vec::new();
        rule_log(&known, &mut new);
        rule_combine(&known, &mut new);
        rule_delegate(view, &known, &mut new);
        let before = known.len();
        known.extend(new);
        if known.len() == before {
            return known;
        }
    }
}

/// Statements derived beyond those in the view.
pub fn derived(view: &View) -> BTreeSet<Statement> {
    derive_closure(view)
        .difference(&view.statements)
        .cloned()
        .collect()
}

/// Whether `Aut(key, name, ·, I)` is derivable with `at` in `I`.
pub fn is_authentic(view: &View, key: &Key, name: &DomainName, at: u64) -> bool {
    derive_closure(view).iter().any(|s| {
        matches!(s, Statement::Aut { key: k, name: n, interval, .. }
            if k == key && n == name && interval.contains(at))
    })
}
