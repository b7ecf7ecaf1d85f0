#pragma once

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "marketrank/complement.hpp"
#include "marketrank/errors.hpp"
#include "marketrank/hedging.hpp"
#include "marketrank/market.hpp"
#include "marketrank/metrics.hpp"
#include "marketrank/process.hpp"
#include "marketrank/ranking.hpp"
#include "marketrank/report.hpp"
#include "marketrank/subspace.hpp"
#include "marketrank/verify.hpp"
#include "marketrank/version.hpp"

namespace marketrank {

namespace detail {

struct CliOpts {
  std::string market;
  std::string market_a;
  std::string market_b;
  std::string claim;
  std::string out;
  std::string format = "json";
  double tol = kDefaultRankTol;
  double angle_tol = kDefaultAngleTol;
  int cases = 200;
  std::uint64_t seed = 0;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ShapeError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_output(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ShapeError("cannot open output file: " + path);
  out << text;
}

struct LoadedMarket {
  MarketSpec spec;
  TreePtr tree;
  IntegrandField theta;
};

inline LoadedMarket load_market(const std::string& path) {
  LoadedMarket lm;
  lm.spec = parse_market(read_file(path));
  lm.tree = build_market_tree(lm.spec);
  lm.theta = build_integrand(lm.spec, lm.tree);
  return lm;
}

inline Json market_json(const MarketSpec& spec) {
  Json j;
  j["m"] = spec.m;
  j["T"] = spec.T;
  j["dt"] = spec.dt;
  if (spec.probs) {
    j["probs"] = json_vector(*spec.probs);
  } else {
    j["probs"] = nullptr;
  }
  Json assets = Json::array();
  for (const auto& a : spec.assets) assets.push_back(a.name);
  j["assets"] = std::move(assets);
  j["text"] = print_market(spec);
  return j;
}

inline AnalysisReport base_report(const std::string& command,
                                  const CliOpts& o) {
  AnalysisReport rep;
  rep.command = command;
  rep.seed = o.seed;
  rep.tol = o.tol;
  rep.angle_tol = o.angle_tol;
  rep.threads = worker_count();
  return rep;
}

inline Json field_matrices(const IntegrandField& f) {
  Json arr = Json::array();
  for (NodeId c = 0; c < f.tree->cell_count(); ++c)
    arr.push_back(json_matrix(f.at(c)));
  return arr;
}

inline Json dims_json(const SubspaceField& w) {
  Json arr = Json::array();
  for (NodeId c = 0; c < w.tree->cell_count(); ++c) arr.push_back(w.dim(c));
  return arr;
}

inline AnalysisReport cmd_analyze(const CliOpts& o) {
  const LoadedMarket lm = load_market(o.market);
  AnalysisReport rep = base_report("analyze", o);
  rep.market = market_json(lm.spec);

  const RankPartition part = ranking_partition(lm.theta, o.tol);
  const PredictableMeasure mu = uniform_time_measure(lm.tree);
  Json partition = Json::array();
  for (int k = 0; k <= part.max_label; ++k) {
    const PredictableSet cells_k = partition_cell(part, k);
    int count = 0;
    for (NodeId c = 0; c < lm.tree->cell_count(); ++c)
      if (cells_k.contains_cell(c)) ++count;
    Json entry;
    entry["label"] = k;
    entry["cells"] = count;
    entry["weight"] = measure_of(cells_k, mu);
    partition.push_back(std::move(entry));
  }

  rep.results["rank"] = rank(lm.theta, o.tol);
  rep.results["satisfies_gamma"] = satisfies_gamma(lm.theta, o.tol);
  rep.results["delta_c"] = delta_c(lm.theta, o.tol);
  rep.results["delta_i"] = delta_i(lm.theta, o.tol);
  rep.results["partition"] = std::move(partition);
  rep.cells = make_cell_rows(lm.theta, o.tol);
  return rep;
}

inline AnalysisReport cmd_arrange(const CliOpts& o) {
  const LoadedMarket lm = load_market(o.market);
  AnalysisReport rep = base_report("arrange", o);
  rep.market = market_json(lm.spec);
  rep.results["rank"] = rank(lm.theta, o.tol);
  rep.results["arrangement"] = field_matrices(arrangement(lm.theta, o.tol));
  rep.cells = make_cell_rows(lm.theta, o.tol);
  return rep;
}

inline AnalysisReport cmd_orthogonalize(const CliOpts& o) {
  const LoadedMarket lm = load_market(o.market);
  AnalysisReport rep = base_report("orthogonalize", o);
  rep.market = market_json(lm.spec);
  rep.results["orthogonalized"] =
      field_matrices(gram_schmidt(lm.theta, o.tol));
  rep.cells = make_cell_rows(lm.theta, o.tol);
  return rep;
}

inline AnalysisReport cmd_complement(const CliOpts& o) {
  const LoadedMarket a = load_market(o.market_a);
  const LoadedMarket b = load_market(o.market_b);
  require_same_tree(*a.tree, *b.tree);
  AnalysisReport rep = base_report("complement", o);
  Json pair;
  pair["a"] = market_json(a.spec);
  pair["b"] = market_json(b.spec);
  rep.market = std::move(pair);

  const IntegrandField comp = orthogonal_complement(a.theta, b.theta, o.tol);
  double max_cross = 0.0;
  for (const Eigen::MatrixXd& g : covariation(b.theta, comp))
    max_cross = std::max(max_cross, g.lpNorm<Eigen::Infinity>());
  Json dims;
  dims["market_a"] = dims_json(plugin_space(a.theta, o.tol));
  dims["market_b"] = dims_json(plugin_space(b.theta, o.tol));
  dims["complement"] = dims_json(plugin_space(comp, o.tol));
  rep.results["complement"] = field_matrices(comp);
  rep.results["dims"] = std::move(dims);
  rep.results["max_cross_covariation"] = max_cross;
  rep.cells = make_cell_rows(a.theta, o.tol);
  return rep;
}

inline AnalysisReport cmd_metrics(const CliOpts& o) {
  const LoadedMarket a = load_market(o.market_a);
  const LoadedMarket b = load_market(o.market_b);
  require_same_tree(*a.tree, *b.tree);
  AnalysisReport rep = base_report("metrics", o);
  Json pair;
  pair["a"] = market_json(a.spec);
  pair["b"] = market_json(b.spec);
  rep.market = std::move(pair);

  const SubspaceField wa = plugin_space(a.theta, o.tol);
  const SubspaceField wb = plugin_space(b.theta, o.tol);
  rep.results["phi"] = phi_metric(wa, wb);
  rep.results["eta"] = eta_metric(wa, wb, o.tol, o.angle_tol);
  rep.results["mu_a"] = dimension_profile(wa).mu;
  rep.results["mu_b"] = dimension_profile(wb).mu;
  rep.results["mu_sum"] = dimension_profile(sum(wa, wb, o.tol)).mu;
  rep.results["mu_intersection"] =
      dimension_profile(intersect(wa, wb, o.angle_tol)).mu;
  rep.results["dims_a"] = dims_json(wa);
  rep.results["dims_b"] = dims_json(wb);
  rep.cells = make_cell_rows(a.theta, o.tol);
  return rep;
}

inline AnalysisReport cmd_corr(const CliOpts& o) {
  const LoadedMarket a = load_market(o.market_a);
  const LoadedMarket b = load_market(o.market_b);
  require_same_tree(*a.tree, *b.tree);
  AnalysisReport rep = base_report("corr", o);
  Json pair;
  pair["a"] = market_json(a.spec);
  pair["b"] = market_json(b.spec);
  rep.market = std::move(pair);

  const SubspaceField wa = plugin_space(a.theta, o.tol);
  const SubspaceField wb = plugin_space(b.theta, o.tol);
  rep.results["correlation"] = correlation(wa, wb, o.tol, o.angle_tol);
  rep.results["mu_sum"] = dimension_profile(sum(wa, wb, o.tol)).mu;
  rep.results["mu_intersection"] =
      dimension_profile(intersect(wa, wb, o.angle_tol)).mu;
  rep.cells = make_cell_rows(a.theta, o.tol);
  return rep;
}

inline AnalysisReport cmd_hedge(const CliOpts& o) {
  const LoadedMarket lm = load_market(o.market);
  AnalysisReport rep = base_report("hedge", o);
  rep.market = market_json(lm.spec);

  const ExprPtr claim_expr = parse_claim(o.claim, lm.spec);
  const Eigen::VectorXd claim = evaluate_claim(claim_expr, lm.spec, *lm.tree);
  const HedgeDecomposition h = kw_decompose(claim, lm.theta, o.tol);

  const AdaptedProcess value = hedge_value_process(h, lm.theta);
  const Eigen::VectorXd terminal = value.values.col(0).tail(claim.size());
  double max_cross = 0.0;
  for (const Eigen::MatrixXd& g : covariation(h.residual, lm.theta))
    max_cross = std::max(max_cross, g.lpNorm<Eigen::Infinity>());

  Json alpha = Json::array();
  for (const Eigen::RowVectorXd& a : h.alpha)
    alpha.push_back(json_vector(a.transpose()));
  std::string claim_text;
  print_expr(claim_expr, claim_text);
  rep.results["claim"] = claim_text;
  rep.results["price"] = h.price;
  rep.results["alpha"] = std::move(alpha);
  rep.results["residual"] = field_matrices(h.residual);
  rep.results["reconstruction_error"] =
      (terminal - claim).lpNorm<Eigen::Infinity>();
  rep.results["max_residual_covariation"] = max_cross;
  rep.cells = make_cell_rows(lm.theta, o.tol);
  return rep;
}

inline AnalysisReport cmd_measures(const CliOpts& o) {
  const LoadedMarket lm = load_market(o.market);
  AnalysisReport rep = base_report("measures", o);
  rep.market = market_json(lm.spec);

  const std::vector<MeasureCell> cells = measure_polytope(lm.theta, o.tol);
  Json arr = Json::array();
  for (NodeId c = 0; c < lm.tree->cell_count(); ++c) {
    const MeasureCell& mc = cells[static_cast<std::size_t>(c)];
    Json entry;
    entry["cell_id"] = c;
    entry["freedom"] = mc.freedom;
    entry["particular"] = json_vector(mc.particular);
    entry["null_basis"] = json_matrix(mc.null_basis);
    arr.push_back(std::move(entry));
  }
  rep.results["measures"] = std::move(arr);
  rep.cells = make_cell_rows(lm.theta, o.tol);
  return rep;
}

inline AnalysisReport cmd_verify(const CliOpts& o, bool* failed) {
  AnalysisReport rep = base_report("verify", o);
  const std::vector<SuiteResult> suites = run_verify(o.cases, o.seed);
  Json arr = Json::array();
  bool all_passed = true;
  for (const SuiteResult& s : suites) {
    Json entry;
    entry["name"] = s.name;
    entry["cases"] = s.cases;
    entry["failures"] = s.failures;
    entry["first_failure"] = s.first_failure;
    arr.push_back(std::move(entry));
    if (s.failures > 0) all_passed = false;
  }
  rep.results["suites"] = std::move(arr);
  rep.results["all_passed"] = all_passed;
  *failed = !all_passed;
  return rep;
}

inline void emit_error(bool as_json, const char* type,
                       const std::string& message, int line = -1,
                       int col = -1) {
  if (as_json) {
    Json inner;
    inner["type"] = type;
    inner["message"] = message;
    if (line >= 0) {
      inner["line"] = line;
      inner["col"] = col;
    }
    Json err;
    err["error"] = std::move(inner);
    std::cerr << err.dump(2) << "\n";
  } else {
    std::cerr << "marketrank: error: " << message << "\n";
  }
}

}  // namespace detail

// Entry point of the command line tool; args excludes the program name.
// Exit codes: 0 success, 1 verification failure, 2 usage error, 3 market or
// computation error.
inline int run_command(const std::vector<std::string>& args) {
  using detail::CliOpts;

  // Error rendering must honour --format even when parsing itself fails, so
  // the flag is scanned before CLI11 runs.
  bool json_errors = true;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--format" && i + 1 < args.size())
      json_errors = args[i + 1] == "json";
    else if (args[i].rfind("--format=", 0) == 0)
      json_errors = args[i].substr(9) == "json";
  }

  CliOpts o;
  std::string selected;

  CLI::App app{"rank and completeness analysis of simplex tree markets",
               std::string(kToolName)};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--tol", o.tol,
                    "relative singular value threshold for rank decisions");
    sub->add_option("--angle-tol", o.angle_tol,
                    "principal angle tolerance in radians");
    sub->add_option("--out", o.out, "write the report to this file");
    sub->add_option("--format", o.format, "report format")
        ->check(CLI::IsMember({"json", "csv"}));
  };
  const auto add_market = [&](CLI::App* sub) {
    sub->add_option("--market", o.market, "market spec file")->required();
  };
  const auto add_pair = [&](CLI::App* sub) {
    sub->add_option("--market-a", o.market_a, "ambient market spec file")
        ->required();
    sub->add_option("--market-b", o.market_b, "second market spec file")
        ->required();
  };
  const auto tag = [&](CLI::App* sub, const char* name) {
    sub->callback([&selected, name] { selected = name; });
    add_common(sub);
    return sub;
  };

  add_market(tag(app.add_subcommand(
                     "analyze", "ranks, partition and completeness degrees"),
                 "analyze"));
  add_market(tag(app.add_subcommand(
                     "arrange", "orthonormal arrangement of the market"),
                 "arrange"));
  add_market(tag(app.add_subcommand(
                     "orthogonalize", "cellwise Gram-Schmidt of the assets"),
                 "orthogonalize"));
  add_pair(tag(app.add_subcommand(
                   "complement", "orthogonal complement of b inside a"),
               "complement"));
  add_pair(tag(app.add_subcommand(
                   "metrics", "incompleteness metrics phi and eta"),
               "metrics"));
  add_pair(tag(app.add_subcommand("corr", "correlation of two markets"),
               "corr"));
  CLI::App* hedge = tag(app.add_subcommand(
                            "hedge", "generalized hedging decomposition"),
                        "hedge");
  add_market(hedge);
  hedge->add_option("--claim", o.claim, "claim expression over terminal nodes")
      ->required();
  add_market(tag(app.add_subcommand(
                     "measures", "martingale measure set per cell"),
                 "measures"));
  CLI::App* verify = tag(app.add_subcommand(
                             "verify", "randomized self checks of the laws"),
                         "verify");
  verify->add_option("--cases", o.cases, "cases per suite")
      ->check(CLI::PositiveNumber);
  verify->add_option("--seed", o.seed, "seed of the case generator");

  try {
    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back(kToolName);
    for (const std::string& a : args) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());

    bool verify_failed = false;
    AnalysisReport rep;
    if (selected == "analyze") rep = detail::cmd_analyze(o);
    else if (selected == "arrange") rep = detail::cmd_arrange(o);
    else if (selected == "orthogonalize") rep = detail::cmd_orthogonalize(o);
    else if (selected == "complement") rep = detail::cmd_complement(o);
    else if (selected == "metrics") rep = detail::cmd_metrics(o);
    else if (selected == "corr") rep = detail::cmd_corr(o);
    else if (selected == "hedge") rep = detail::cmd_hedge(o);
    else if (selected == "measures") rep = detail::cmd_measures(o);
    else if (selected == "verify") rep = detail::cmd_verify(o, &verify_failed);
    else throw ShapeError("no subcommand selected");

    detail::write_output(o.format == "csv" ? rep.to_csv() : rep.to_json(),
                         o.out);
    return verify_failed ? 1 : 0;
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    std::cout << kVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    detail::emit_error(json_errors, "UsageError", e.what());
    return 2;
  } catch (const SyntaxError& e) {
    detail::emit_error(json_errors, e.kind(), e.what(), e.line, e.col);
    return 3;
  } catch (const UnknownIdentifier& e) {
    detail::emit_error(json_errors, e.kind(), e.what(), e.line, e.col);
    return 3;
  } catch (const Error& e) {
    detail::emit_error(json_errors, e.kind(), e.what());
    return 3;
  } catch (const std::exception& e) {
    detail::emit_error(json_errors, "InternalError", e.what());
    return 3;
  }
}

}  // namespace marketrank
