#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "marketrank/hedging.hpp"
#include "marketrank/linalg.hpp"
#include "marketrank/parallel.hpp"
#include "marketrank/process.hpp"
#include "marketrank/ranking.hpp"
#include "marketrank/subspace.hpp"
#include "marketrank/version.hpp"

namespace marketrank {

using Json = nlohmann::ordered_json;

// Flat per-cell table shared by every report; this is also the whole CSV
// projection.
struct CellRow {
  NodeId cell_id = 0;
  int time = 0;
  int rank = 0;     // ranking partition label
  int dd = 0;       // dimension of the market's space at the cell
  int freedom = 0;  // dimension of the one-step martingale measure set
};

struct AnalysisReport {
  std::string command;
  std::uint64_t seed = 0;
  double tol = kDefaultRankTol;
  double angle_tol = kDefaultAngleTol;
  int threads = 1;
  std::string time_measure = "P x uniform over trading times";
  Json market;   // market echo or null
  Json results;  // command-specific payload
  std::vector<CellRow> cells;

  Json to_json_value() const {
    Json doc;
    doc["tool"] = kToolName;
    doc["version"] = kVersion;
    doc["command"] = command;
    doc["seed"] = seed;
    Json config;
    config["tol"] = tol;
    config["angle_tol"] = angle_tol;
    config["threads"] = threads;
    config["time_measure"] = time_measure;
    doc["config"] = std::move(config);
    doc["market"] = market.is_null() ? Json(nullptr) : market;
    doc["results"] = results.is_null() ? Json(Json::object()) : results;
    Json rows = Json::array();
    for (const CellRow& r : cells) {
      Json row;
      row["cell_id"] = r.cell_id;
      row["time"] = r.time;
      row["rank"] = r.rank;
      row["dd"] = r.dd;
      row["freedom"] = r.freedom;
      rows.push_back(std::move(row));
    }
    doc["cells"] = std::move(rows);
    return doc;
  }

  std::string to_json() const { return to_json_value().dump(2) + "\n"; }

  std::string to_csv() const {
    std::string out = "cell_id,time,rank,dd,freedom\n";
    for (const CellRow& r : cells) {
      out += std::to_string(r.cell_id) + "," + std::to_string(r.time) + "," +
             std::to_string(r.rank) + "," + std::to_string(r.dd) + "," +
             std::to_string(r.freedom) + "\n";
    }
    return out;
  }

  static AnalysisReport from_json(const std::string& text) {
    const Json doc = Json::parse(text);
    AnalysisReport rep;
    rep.command = doc.at("command").get<std::string>();
    rep.seed = doc.at("seed").get<std::uint64_t>();
    const Json& config = doc.at("config");
    rep.tol = config.at("tol").get<double>();
    rep.angle_tol = config.at("angle_tol").get<double>();
    rep.threads = config.at("threads").get<int>();
    rep.time_measure = config.at("time_measure").get<std::string>();
    rep.market = doc.at("market");
    rep.results = doc.at("results");
    for (const Json& row : doc.at("cells")) {
      CellRow r;
      r.cell_id = row.at("cell_id").get<NodeId>();
      r.time = row.at("time").get<int>();
      r.rank = row.at("rank").get<int>();
      r.dd = row.at("dd").get<int>();
      r.freedom = row.at("freedom").get<int>();
      rep.cells.push_back(r);
    }
    return rep;
  }
};

inline Json json_matrix(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Json json_vector(const Eigen::VectorXd& v) {
  Json row = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) row.push_back(v(i));
  return row;
}

// The standard per-cell table of a market.
inline std::vector<CellRow> make_cell_rows(const IntegrandField& theta,
                                           double tol = kDefaultRankTol) {
  const RankPartition part = ranking_partition(theta, tol);
  const SubspaceField space = plugin_space(theta, tol);
  const std::vector<MeasureCell> measures = measure_polytope(theta, tol);
  std::vector<CellRow> rows;
  rows.reserve(static_cast<std::size_t>(theta.tree->cell_count()));
  for (NodeId c = 0; c < theta.tree->cell_count(); ++c) {
    CellRow r;
    r.cell_id = c;
    r.time = theta.tree->time_of(c);
    r.rank = part.label[static_cast<std::size_t>(c)];
    r.dd = space.dim(c);
    r.freedom = measures[static_cast<std::size_t>(c)].freedom;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace marketrank
