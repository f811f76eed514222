// SPDX-License-Identifier: Apache-2.0
#pragma once

// Scoring separated estimates against a generated dataset, grouped by
// distractor scenario.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "glasswave/core.hpp"
#include "glasswave/metrics.hpp"
#include "glasswave/scene.hpp"
#include "glasswave/wav.hpp"

namespace glasswave {

struct SceneScore {
  std::string scene_id;
  std::string scenario;
  std::size_t bystanders = 0;
  std::string snr_bucket;
  double wearer_si_sdr = 0.0;
  double partner_si_sdr = 0.0;
  double wearer_improvement = 0.0;
  double partner_improvement = 0.0;
};

struct Summary {
  double mean = 0.0;
  double median = 0.0;
  double p10 = 0.0;
  double p90 = 0.0;
};

/// Linear-interpolation percentile, q in [0, 1].
inline double percentile(std::vector<double> values, double q) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

inline Summary summarize(const std::vector<double>& values) {
  Summary s;
  if (values.empty()) return {std::nan(""), std::nan(""), std::nan(""), std::nan("")};
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  s.median = percentile(values, 0.5);
  s.p10 = percentile(values, 0.1);
  s.p90 = percentile(values, 0.9);
  return s;
}

inline const char* const kScoreFields[] = {"wearer_si_sdr", "partner_si_sdr", "wearer_improvement",
                                           "partner_improvement"};

inline double score_field(const SceneScore& s, std::string_view field) {
  if (field == "wearer_si_sdr") return s.wearer_si_sdr;
  if (field == "partner_si_sdr") return s.partner_si_sdr;
  if (field == "wearer_improvement") return s.wearer_improvement;
  return s.partner_improvement;
}

/// 8 dB wide buckets aligned at -8 dB, e.g. "[0,8)".
inline std::string snr_bucket(double snr_db) {
  const double lo = -8.0 + 8.0 * std::floor((snr_db + 8.0) / 8.0);
  std::ostringstream os;
  os << '[' << lo << ',' << lo + 8.0 << ')';
  return os.str();
}

struct EvaluationReport {
  std::vector<SceneScore> records;
  std::map<std::string, std::map<std::string, Summary>> aggregates;  // scenario -> field -> summary
  std::vector<std::string> missing;

  bool complete() const noexcept { return missing.empty(); }

  void aggregate() {
    aggregates.clear();
    std::map<std::string, std::vector<const SceneScore*>> groups;
    for (const auto& r : records) groups[r.scenario].push_back(&r);
    for (const auto& [scenario, members] : groups) {
      for (const char* field : kScoreFields) {
        std::vector<double> v;
        for (const auto* r : members) v.push_back(score_field(*r, field));
        aggregates[scenario][field] = summarize(v);
      }
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json recs = nlohmann::json::array();
    for (const auto& r : records) {
      recs.push_back({{"scene_id", r.scene_id},
                      {"scenario", r.scenario},
                      {"bystanders", r.bystanders},
                      {"snr_bucket", r.snr_bucket},
                      {"wearer_si_sdr", r.wearer_si_sdr},
                      {"partner_si_sdr", r.partner_si_sdr},
                      {"wearer_improvement", r.wearer_improvement},
                      {"partner_improvement", r.partner_improvement}});
    }
    nlohmann::json agg = nlohmann::json::object();
    for (const auto& [scenario, fields] : aggregates) {
      for (const auto& [field, s] : fields) {
        agg[scenario][field] = {{"mean", s.mean}, {"median", s.median}, {"p10", s.p10}, {"p90", s.p90}};
      }
    }
    return {{"records", recs}, {"aggregates", agg}, {"missing", missing}};
  }

  /// Aggregate table, one row per scenario and metric.
  std::string to_table() const {
    std::ostringstream os;
    os << "scenario\tmetric\tmean\tmedian\tp10\tp90\n" << std::fixed << std::setprecision(3);
    for (const auto& [scenario, fields] : aggregates) {
      for (const char* field : kScoreFields) {
        const auto& s = fields.at(field);
        os << scenario << '\t' << field << '\t' << s.mean << '\t' << s.median << '\t' << s.p10 << '\t' << s.p90 << '\n';
      }
    }
    for (const auto& m : missing) os << "missing\t" << m << '\n';
    return os.str();
  }
};

/// Scores every scene listed in `dataset_dir/dataset.json` against
/// `estimates_dir/<scene_id>/{wearer,partner}.wav`. References are the
/// wearer and partner stems at the reference microphone. Missing estimates
/// are collected, not fatal.
inline EvaluationReport evaluate_run(const std::filesystem::path& dataset_dir, const std::filesystem::path& estimates_dir) {
  std::ifstream in(dataset_dir / "dataset.json");
  if (!in) throw Error(ErrorKind::io, "metrics", "missing dataset.json in " + dataset_dir.string());
  nlohmann::json dataset;
  try {
    in >> dataset;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::invalid_input, "metrics", std::string("malformed dataset manifest: ") + e.what());
  }
  EvaluationReport report;
  for (const auto& entry : dataset.at("scenes")) {
    const auto id = entry.at("id").get<std::string>();
    const auto scene_dir = dataset_dir / entry.at("dir").get<std::string>();
    bool ok = true;
    for (const char* role : {"wearer", "partner"}) {
      const auto path = estimates_dir / id / (std::string(role) + ".wav");
      if (!std::filesystem::exists(path)) {
        report.missing.push_back(path.string());
        ok = false;
      }
    }
    if (!ok) continue;
    const auto [manifest, scene] = load_scene(scene_dir);
    const Eigen::VectorXd mix = scene.mixture_reference();
    auto estimate = [&](const char* role) {
      const auto wav = read_wav(estimates_dir / id / (std::string(role) + ".wav"));
      if (wav.samples.rows() != 1 || wav.samples.cols() != mix.size()) {
        throw Error(ErrorKind::shape_mismatch, "metrics", "estimate " + id + "/" + role + " must be mono and mixture length");
      }
      return Eigen::VectorXd(wav.samples.row(0).transpose());
    };
    const Eigen::VectorXd w_ref = scene.reference("wearer");
    const Eigen::VectorXd p_ref = scene.reference("partner");
    const Eigen::VectorXd w_est = estimate("wearer");
    const Eigen::VectorXd p_est = estimate("partner");
    SceneScore s;
    s.scene_id = id;
    s.scenario = entry.at("scenario").get<std::string>();
    s.bystanders = entry.at("bystanders").get<std::size_t>();
    s.snr_bucket = snr_bucket(entry.at("target_snr_db").get<double>());
    s.wearer_si_sdr = si_sdr(w_est, w_ref);
    s.partner_si_sdr = si_sdr(p_est, p_ref);
    s.wearer_improvement = si_sdr_improvement(w_est, mix, w_ref);
    s.partner_improvement = si_sdr_improvement(p_est, mix, p_ref);
    report.records.push_back(std::move(s));
  }
  report.aggregate();
  return report;
}

}  // namespace glasswave
