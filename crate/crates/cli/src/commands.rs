use std::fmt::Write as _;
use std::path::Path;

use serde_json::{json, Map, Value};

use rnl_core::bracket::{act, BasisChange, Bracket, Triple};
use rnl_core::certify::{
    centralizer_tag, certify_srn_nice, certify_srn_sampled, NiceOutcome, Refutation, SampledOutcome, SrnCertificate,
    TermKey,
};
use rnl_core::cone::{cone_membership, cone_section, weyl_invariance_check, ConeSection, SectionMode, Verdict};
use rnl_core::corpus;
use rnl_core::curvature::{is_ricci_negative, ricci_extension, ricci_nilpotent, MetricParams};
use rnl_core::degeneration::{
    heintze_degeneration, limit_bracket, milnor_heis_curve, milnor_hyp_curve, pinching_transfer, trajectory,
    DegenerationCurve, Predicate, Transfer, CAUCHY_TOL,
};
use rnl_core::derivations::{derivation_space, diagonal_torus, Derivation};
use rnl_core::field::{format_f64, parse_rational, Rational};
use rnl_core::format::{algebra_to_value, load_algebra, matrix, num, nums, parse_matrix, parse_vector, rational, rationals};
use rnl_core::linalg::{self, Mat};
use rnl_core::moment::{hull_coordinates, moment_diagonal_exact, moment_map, nice_basis_check, weight_polytope, NiceViolation};
use rnl_core::orbit::{orbit_sample, GroupTag};
use rnl_core::search::{search_rn_metric, witness_from_certificate, SearchConfig, SearchOutcome};
use rnl_core::weyl::orthogonal_weyl_group;
use rnl_core::{Error, Result};

use crate::{Command, Format, Method, Output, PredicateArg, EXIT_OK, EXIT_PRECONDITION, EXIT_UNKNOWN};

pub fn run(command: &Command, seed: u64) -> Result<Output> {
    match command {
        Command::Ricci { algebra, derivation } => ricci(&load(&algebra.algebra)?, derivation.as_deref()),
        Command::Derivations { algebra } => derivations(&load(&algebra.algebra)?),
        Command::Torus { algebra } => torus(&load(&algebra.algebra)?),
        Command::Nice { algebra } => nice(&load(&algebra.algebra)?),
        Command::Moment { algebra, basis_change } => moment(&load(&algebra.algebra)?, basis_change.as_deref()),
        Command::Hull { algebra } => hull(&load(&algebra.algebra)?),
        Command::OrbitSample { algebra, group, count } => {
            orbit_csv(&load(&algebra.algebra)?, group, *count, seed)
        }
        Command::Certify {
            algebra,
            derivation,
            method,
            budget,
        } => certify(&load(&algebra.algebra)?, derivation, *method, *budget, seed),
        Command::Cone {
            algebra,
            trace_level,
            resolution,
            exact,
            sampled,
            derivation,
            format,
        } => {
            let b = load(&algebra.algebra)?;
            match derivation {
                Some(d) => membership(&b, d, seed),
                None => {
                    let mode = if *exact {
                        SectionMode::Exact
                    } else if *sampled {
                        SectionMode::Sampled
                    } else {
                        SectionMode::Auto
                    };
                    section(&b, *trace_level, mode, *resolution, seed, *format)
                }
            }
        }
        Command::Degenerate {
            algebra,
            curve,
            predicate,
            t_max,
        } => degenerate(algebra.as_deref(), curve, *predicate, *t_max),
        Command::Corpus { name } => corpus_entry(name.as_deref()),
    }
}

fn json_out(v: Value, code: u8) -> Result<Output> {
    Ok(Output {
        text: serde_json::to_string_pretty(&v)?,
        code,
    })
}

/// Corpus name, or a file when the path exists.
fn load(spec: &str) -> Result<Bracket> {
    if Path::new(spec).is_file() {
        load_algebra(&std::fs::read_to_string(spec)?)
    } else {
        corpus::lookup(spec).map(|e| e.bracket)
    }
}

fn parse_derivation(text: &str, n: usize) -> Result<Mat> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::Parse(format!("derivation: {e}")))?;
    let m = if v.as_array().is_some_and(|a| a.iter().all(Value::is_array)) && !v.as_array().unwrap().is_empty() {
        parse_matrix(text)?
    } else {
        linalg::diag_mat(&parse_vector(text)?)
    };
    if m.nrows() != n {
        return Err(Error::Dimension {
            expected: n,
            got: m.nrows(),
        });
    }
    Ok(m)
}

fn parse_diagonal(text: &str, n: usize) -> Result<Vec<f64>> {
    let m = parse_derivation(text, n)?;
    if !linalg::is_diagonal(&m, 0.0) {
        return Err(Error::Precondition("a diagonal derivation is required".into()));
    }
    Ok(m.diagonal().iter().copied().collect())
}

fn triple(t: &Triple) -> Value {
    json!([t.i + 1, t.j + 1, t.k + 1])
}

fn ricci(b: &Bracket, derivation: Option<&str>) -> Result<Output> {
    let Some(text) = derivation else {
        let r = ricci_nilpotent(b);
        let eig = linalg::sym_eigenvalues(&r);
        return json_out(
            json!({
                "ricci": matrix(&r),
                "eigenvalues": nums(&eig),
                "lambda_max": num(linalg::lambda_max(&r)),
                "scalar": num(r.trace()),
            }),
            EXIT_OK,
        );
    };
    let d = Derivation::new(parse_derivation(text, b.dim())?, b)?;
    let block = ricci_extension(&d, b)?;
    json_out(
        json!({
            "blocks": {
                "ff": num(block.ff),
                "fn": nums(block.fn_row.as_slice()),
                "nn": matrix(&block.nn),
                "star": nums(block.star.as_slice()),
            },
            "ricci": matrix(&block.assembled()),
            "eigenvalues": nums(&block.eigenvalues()),
            "lambda_max": num(block.lambda_max()),
            "oracle_delta": num(block.oracle_delta),
        }),
        EXIT_OK,
    )
}

fn derivations(b: &Bracket) -> Result<Output> {
    let space = derivation_space(b)?;
    let n = b.dim();
    let exact = space.exact.as_ref().map(|vs| {
        vs.iter()
            .map(|v| Value::Array(v.chunks(n).map(rationals).collect()))
            .collect::<Vec<_>>()
    });
    json_out(
        json!({
            "dim": space.dim(),
            "basis": space.basis.iter().map(matrix).collect::<Vec<_>>(),
            "exact_basis": exact,
        }),
        EXIT_OK,
    )
}

fn torus(b: &Bracket) -> Result<Output> {
    let t = diagonal_torus(b);
    let weights: Vec<Value> = t
        .weights()
        .iter()
        .map(|w| json!({"functional": rationals(&w.functional), "indices": w.indices.iter().map(|i| i + 1).collect::<Vec<_>>()}))
        .collect();
    let weyl = match orthogonal_weyl_group(b, &t) {
        Ok(w) => json!({
            "order": w.order(),
            "automorphisms": w.automorphism_count,
            "actions": w.actions.iter().map(|a| Value::Array(a.iter().map(|r| rationals(r)).collect())).collect::<Vec<_>>(),
        }),
        Err(e) => json!({"error": e.to_string()}),
    };
    json_out(
        json!({
            "dim": t.dim(),
            "basis": t.basis().iter().map(|v| rationals(v)).collect::<Vec<_>>(),
            "weights": weights,
            "multiplicity_free": t.is_multiplicity_free(),
            "weyl": weyl,
        }),
        EXIT_OK,
    )
}

fn pair(p: (usize, usize)) -> Value {
    json!([p.0 + 1, p.1 + 1])
}

fn nice(b: &Bracket) -> Result<Output> {
    let r = nice_basis_check(b);
    let violations: Vec<Value> = r
        .violations
        .iter()
        .map(|v| match v {
            NiceViolation::MultipleTargets { pair: p, targets } => json!({
                "kind": "multiple_targets",
                "pair": pair(*p),
                "targets": targets.iter().map(|k| k + 1).collect::<Vec<_>>(),
            }),
            NiceViolation::OverlappingPairs { target, first, second } => json!({
                "kind": "overlapping_pairs",
                "target": target + 1,
                "first": pair(*first),
                "second": pair(*second),
            }),
        })
        .collect();
    json_out(json!({"nice": r.nice, "violations": violations}), EXIT_OK)
}

fn moment(b: &Bracket, basis_change: Option<&str>) -> Result<Output> {
    let moved = match basis_change {
        Some(text) => act(&BasisChange::new(parse_matrix(text)?)?, b)?,
        None => b.clone(),
    };
    let m = moment_map(&moved)?;
    json_out(
        json!({
            "matrix": matrix(m.matrix()),
            "diagonal": nums(&m.diagonal()),
            "exact_diagonal": moment_diagonal_exact(&moved).map(|v| rationals(&v)),
            "off_diagonal_norm": num(m.off_diagonal_norm()),
        }),
        EXIT_OK,
    )
}

fn hull(b: &Bracket) -> Result<Output> {
    let wp = weight_polytope(b)?;
    let poly = &wp.polytope;
    let vertex_set = poly.vertex_indices();
    let points: Vec<Value> = wp
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            json!({
                "weight": p.weight,
                "triples": p.triples.iter().map(triple).collect::<Vec<_>>(),
                "vertex": vertex_set.contains(&i),
            })
        })
        .collect();
    let facets: Vec<Value> = poly
        .facets()
        .iter()
        .map(|f| {
            json!({
                "points": f.points.iter().collect::<Vec<_>>(),
                "normal": rationals(&f.normal),
                "offset": rational(&f.offset),
            })
        })
        .collect();
    json_out(
        json!({
            "dim": poly.dim(),
            "f_vector": poly.f_vector(),
            "is_cube": poly.is_combinatorial_cube(),
            "points": points,
            "facets": facets,
        }),
        EXIT_OK,
    )
}

fn parse_group(text: &str, n: usize) -> Result<GroupTag> {
    match text {
        "diag" => Ok(GroupTag::DiagPositive),
        "torus" => Ok(GroupTag::TorusCentralizer),
        _ => match text.strip_prefix("derivation:") {
            Some(d) => Ok(GroupTag::DerivationCentralizer(parse_diagonal(d, n)?)),
            None => Err(Error::Parse(format!(
                "unknown group {text:?}; expected diag, torus or derivation:<vector>"
            ))),
        },
    }
}

fn orbit_csv(b: &Bracket, group: &str, count: usize, seed: u64) -> Result<Output> {
    let tag = parse_group(group, b.dim())?;
    let sample = orbit_sample(tag, b, count, seed)?;
    let support = b.support();
    let mut out = String::from("sample,diagonalized");
    for i in 0..b.dim() {
        write!(out, ",m{}", i + 1).unwrap();
    }
    for t in &support {
        write!(out, ",c_{}_{}_{}", t.i + 1, t.j + 1, t.k + 1).unwrap();
    }
    out.push('\n');
    for (s, p) in sample.points.iter().enumerate() {
        let moved = act(&BasisChange::new(p.g.clone())?, b)?;
        let coords = hull_coordinates(&moved);
        write!(out, "{s},{}", u8::from(p.diagonalized)).unwrap();
        for v in p.moment.diagonal() {
            write!(out, ",{}", format_f64(v)).unwrap();
        }
        for t in &support {
            let v = coords.iter().find(|(u, _)| u == t).map_or(0.0, |(_, v)| *v);
            write!(out, ",{}", format_f64(v)).unwrap();
        }
        out.push('\n');
    }
    Ok(Output { text: out, code: EXIT_OK })
}

fn metric_json(p: &MetricParams) -> Value {
    json!({"c": num(p.c), "x": nums(p.x.as_slice()), "h": matrix(&p.h)})
}

fn certificate_json(cert: &SrnCertificate, b: &Bracket, seed: u64) -> Result<Value> {
    let terms: Vec<Value> = cert
        .support()
        .map(|t| {
            let source = match &t.key {
                TermKey::Triple(tr) => json!({
                    "kind": "weight",
                    "triple": triple(tr),
                }),
                TermKey::Sample(s) => json!({
                    "kind": "orbit-sample",
                    "index": s,
                    "seed": seed,
                    "group_element": t.group_element.as_ref().map(matrix),
                }),
            };
            json!({
                "coefficient": num(t.coefficient),
                "point": nums(&t.point),
                "source": source,
            })
        })
        .collect();
    let exact = cert.exact.as_ref().map(|e| {
        json!({
            "coefficients": rationals(&e.coefficients),
            "margin": rational(&e.margin),
        })
    });
    let metric = match witness_from_certificate(cert, b) {
        Some(p) => {
            let d = Derivation::diagonal(&cert.derivation, b)?;
            let report = is_ricci_negative(&d, b, &p)?;
            json!({
                "params": metric_json(&p),
                "lambda_max": num(report.lambda_max),
                "negative": report.negative,
            })
        }
        None => Value::Null,
    };
    Ok(json!({
        "method": cert.method,
        "derivation": nums(&cert.derivation),
        "margin": num(cert.margin),
        "recomputed_margin": num(cert.recomputed_margin()),
        "terms": terms,
        "exact": exact,
        "metric": metric,
    }))
}

fn refutation_json(r: &Refutation) -> Value {
    json!({
        "y": nums(&r.y),
        "value": num(r.value),
        "exact_value": r.exact_value.as_ref().map(rational),
        "complete": r.complete,
    })
}

fn search_json(d: &[f64], b: &Bracket, budget: usize, seed: u64, warm: Option<MetricParams>) -> Result<(Value, bool)> {
    let der = Derivation::diagonal(d, b)?;
    let config = SearchConfig {
        budget,
        seed,
        warm_starts: warm.into_iter().collect(),
    };
    Ok(match search_rn_metric(&der, b, &config)? {
        SearchOutcome::Witness(w) => (
            json!({
                "found": true,
                "params": metric_json(&w.params),
                "lambda_max": num(w.lambda_max),
                "evaluations": w.evaluations,
                "restart": w.restart,
            }),
            true,
        ),
        SearchOutcome::Failure {
            best_lambda_max,
            evaluations,
        } => (
            json!({
                "found": false,
                "best_lambda_max": num(best_lambda_max),
                "evaluations": evaluations,
            }),
            false,
        ),
    })
}

fn certify(b: &Bracket, derivation: &str, method: Method, budget: usize, seed: u64) -> Result<Output> {
    let d = parse_diagonal(derivation, b.dim())?;
    let mut out = Map::new();
    out.insert("derivation".into(), nums(&d));
    let code = match method {
        Method::NiceLp => match certify_srn_nice(&d, b)? {
            NiceOutcome::Certified(c) => {
                out.insert("certified".into(), json!(true));
                out.insert("certificate".into(), certificate_json(&c, b, seed)?);
                EXIT_OK
            }
            NiceOutcome::Infeasible(r) => {
                out.insert("certified".into(), json!(false));
                out.insert("refutation".into(), refutation_json(&r));
                if r.complete {
                    EXIT_OK
                } else {
                    EXIT_UNKNOWN
                }
            }
        },
        Method::SampledLp => {
            let tag = centralizer_tag(&d);
            out.insert("group".into(), json!(tag.name()));
            let sample = orbit_sample(tag, b, rnl_core::cone::SAMPLE_COUNT, seed)?;
            match certify_srn_sampled(&d, b, &sample)? {
                SampledOutcome::Certified(c) => {
                    out.insert("certified".into(), json!(true));
                    out.insert("certificate".into(), certificate_json(&c, b, seed)?);
                    EXIT_OK
                }
                SampledOutcome::Unknown { best_margin } => {
                    out.insert("certified".into(), json!(false));
                    out.insert("best_margin".into(), num(best_margin));
                    EXIT_UNKNOWN
                }
            }
        }
        Method::Search => {
            let (v, found) = search_json(&d, b, budget, seed, None)?;
            out.insert("certified".into(), json!(found));
            out.insert("search".into(), v);
            if found {
                EXIT_OK
            } else {
                EXIT_UNKNOWN
            }
        }
        Method::Auto => {
            let m = cone_membership(&d, b, seed)?;
            out.insert("verdict".into(), json!(m.verdict));
            out.insert("reason".into(), json!(m.reason));
            if let Some(r) = &m.refutation {
                out.insert("refutation".into(), refutation_json(r));
            }
            match (&m.verdict, &m.certificate) {
                (Verdict::In, Some(c)) => {
                    out.insert("certified".into(), json!(true));
                    out.insert("certificate".into(), certificate_json(c, b, seed)?);
                    EXIT_OK
                }
                (Verdict::Out, _) => {
                    out.insert("certified".into(), json!(false));
                    EXIT_OK
                }
                _ => {
                    let (v, found) = search_json(&d, b, budget, seed, None)?;
                    out.insert("certified".into(), json!(found));
                    out.insert("search".into(), v);
                    if found {
                        EXIT_OK
                    } else {
                        EXIT_UNKNOWN
                    }
                }
            }
        }
    };
    json_out(Value::Object(out), code)
}

fn membership(b: &Bracket, derivation: &str, seed: u64) -> Result<Output> {
    let d = parse_diagonal(derivation, b.dim())?;
    let m = cone_membership(&d, b, seed)?;
    let v = json!({
        "derivation": nums(&d),
        "verdict": m.verdict,
        "reason": m.reason,
        "certificate": m.certificate.as_ref().map(|c| certificate_json(c, b, seed)).transpose()?,
        "refutation": m.refutation.as_ref().map(refutation_json),
    });
    json_out(v, if m.verdict == Verdict::Unknown { EXIT_UNKNOWN } else { EXIT_OK })
}

fn section_csv(s: &ConeSection) -> String {
    let k = s.torus_basis.len();
    let n = s.torus_basis.first().map_or(0, Vec::len);
    let mut out = String::from("vertex");
    for i in 0..k {
        write!(out, ",x{}", i + 1).unwrap();
    }
    for i in 0..n {
        write!(out, ",d{}", i + 1).unwrap();
    }
    out.push('\n');
    for (vi, v) in s.vertices.iter().enumerate() {
        write!(out, "{vi}").unwrap();
        for x in v.iter().chain(&s.diagonal_of(v)) {
            write!(out, ",{}", format_f64(*x)).unwrap();
        }
        out.push('\n');
    }
    out
}

fn section(b: &Bracket, t: f64, mode: SectionMode, resolution: usize, seed: u64, format: Format) -> Result<Output> {
    let s = cone_section(b, t, mode, resolution, seed)?;
    if format == Format::Csv {
        return Ok(Output {
            text: section_csv(&s),
            code: EXIT_OK,
        });
    }
    let torus = diagonal_torus(b);
    let weyl = match orthogonal_weyl_group(b, &torus) {
        Ok(g) => serde_json::to_value(weyl_invariance_check(&s, &g)).map(|mut v| {
            v["worst_distance"] = num(v["worst_distance"].as_f64().unwrap_or(f64::NAN));
            v
        })?,
        Err(e) => json!({"error": e.to_string()}),
    };
    json_out(
        json!({
            "trace_level": num(s.trace_level),
            "torus_basis": s.torus_basis.iter().map(|v| rationals(v)).collect::<Vec<_>>(),
            "vertices": s.vertices.iter().map(|v| nums(v)).collect::<Vec<_>>(),
            "diagonals": s.vertices.iter().map(|v| nums(&s.diagonal_of(v))).collect::<Vec<_>>(),
            "exact_vertices": s.exact_vertices.as_ref().map(|vs| vs.iter().map(|v| rationals(v)).collect::<Vec<_>>()),
            "exactness": s.exactness,
            "dim": s.dim,
            "f_vector": s.f_vector,
            "is_cube": s.is_cube,
            "weyl_report": weyl,
        }),
        EXIT_OK,
    )
}

fn parse_rationals(text: &str) -> Result<Vec<Rational>> {
    let t = text.trim();
    if t.starts_with('[') {
        let v: Value = serde_json::from_str(t).map_err(|e| Error::Parse(format!("exponents: {e}")))?;
        v.as_array()
            .ok_or_else(|| Error::Parse("expected a JSON array".into()))?
            .iter()
            .map(|x| match x {
                Value::String(s) => parse_rational(s),
                other => parse_rational(&other.to_string()),
            })
            .collect()
    } else {
        t.split(',').map(|s| parse_rational(s.trim())).collect()
    }
}

fn degenerate(algebra: Option<&str>, spec: &str, predicate: PredicateArg, t_max: f64) -> Result<Output> {
    let need = || {
        algebra
            .ok_or_else(|| Error::Parse(format!("--algebra is required for curve {spec:?}")))
            .and_then(load)
    };
    let curve: DegenerationCurve = match spec {
        "milnor-heis" => milnor_heis_curve(),
        "milnor-hyp" => milnor_hyp_curve(),
        _ => {
            if let Some(e) = spec.strip_prefix("diag:") {
                DegenerationCurve::diagonal(need()?, parse_rationals(e)?)?
            } else if let Some(d) = spec.strip_prefix("heintze:") {
                let b = need()?;
                let der = Derivation::new(parse_derivation(d, b.dim())?, &b)?;
                heintze_degeneration(&der, &b)?
            } else {
                return Err(Error::Parse(format!(
                    "unknown curve {spec:?}; expected diag:<exponents>, heintze:<D>, milnor-heis or milnor-hyp"
                )));
            }
        }
    };
    let pred = match predicate {
        PredicateArg::RicciNegative => Predicate::RicciNegative,
        PredicateArg::ScalarNegative => Predicate::ScalarNegative,
    };
    let limit = limit_bracket(&curve, t_max, CAUCHY_TOL)?;
    let traj: Vec<Value> = trajectory(&curve)?
        .into_iter()
        .filter(|p| p.t <= t_max)
        .map(|p| json!({"t": num(p.t), "norm": num(p.norm), "lambda_max": num(p.lambda_max), "scalar": num(p.scalar)}))
        .collect();
    let (transfer, code) = match pinching_transfer(&curve, pred) {
        Ok(Transfer::Found {
            k,
            t,
            value,
            basis_change,
        }) => (
            json!({"found": true, "k": k, "t": num(t), "value": num(value), "basis_change": matrix(&basis_change)}),
            EXIT_OK,
        ),
        Ok(Transfer::NotFound {
            best_value,
            limit_value,
        }) => (
            json!({"found": false, "best_value": num(best_value), "limit_value": num(limit_value)}),
            EXIT_UNKNOWN,
        ),
        Err(Error::Precondition(msg)) => (json!({"found": false, "error": msg}), EXIT_PRECONDITION),
        Err(e) => return Err(e),
    };
    json_out(
        json!({
            "curve": spec,
            "predicate": pred,
            "source": algebra_to_value(&curve.source),
            "limit": {
                "bracket": algebra_to_value(&limit.bracket),
                "closed_form": limit.closed_form,
                "cauchy_gap": num(limit.cauchy_gap),
                "jacobi_residual": num(limit.jacobi_residual),
                "predicate_value": num(pred.value(&limit.bracket)),
            },
            "trajectory": traj,
            "transfer": transfer,
        }),
        code,
    )
}

fn corpus_entry(name: Option<&str>) -> Result<Output> {
    let Some(name) = name else {
        return json_out(json!({"entries": corpus::NAMES}), EXIT_OK);
    };
    let e = corpus::lookup(name)?;
    let mut v = algebra_to_value(&e.bracket);
    v["name"] = json!(name);
    json_out(v, EXIT_OK)
}
