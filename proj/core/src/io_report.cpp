#include <json.hpp>

#include "rplift/error.hpp"
#include "rplift/io.hpp"

namespace rplift {

namespace {

using nlohmann::json;

constexpr const char* kDifficultyKeys[3] = {"easy", "moderate", "hard"};

json to_json(const ErrorStats& s) {
  return {{"mean", s.mean}, {"median", s.median}, {"p95", s.p95}, {"count", s.count}};
}

json to_json(const MethodStats& m) {
  return {{"center", to_json(m.center)},
          {"depth", to_json(m.depth)},
          {"dims", to_json(m.dims)},
          {"yaw", to_json(m.yaw)},
          {"failures", m.failures}};
}

const json& require(const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) throw Error(ErrorCode::MissingKey, std::string("missing '") + key + "'");
  return obj.at(key);
}

}  // namespace

std::string eval_report_to_json(const EvalReport& report) {
  json per = json::object();
  for (int d = 0; d < 3; ++d) {
    json pr = json::array();
    for (const auto& [r, p] : report.per_difficulty[d].points) pr.push_back({r, p});
    per[kDifficultyKeys[d]] = {{"ap", report.per_difficulty[d].ap}, {"pr", pr}, {"num_gt", report.num_gt[d]}};
  }
  json j = {{"metric", to_string(report.config.metric)},
            {"recall_variant", to_string(report.config.recall_points)},
            {"iou_threshold", report.config.iou_threshold},
            {"class", report.config.cls},
            {"per_difficulty", per}};
  return j.dump(2) + "\n";
}

EvalReport eval_report_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    EvalReport report;
    const std::string metric = require(j, "metric").get<std::string>();
    if (metric == "3d") {
      report.config.metric = IouMetric::IoU3D;
    } else if (metric == "bev") {
      report.config.metric = IouMetric::IoUBEV;
    } else {
      throw Error(ErrorCode::UnsupportedFormat, "unknown metric '" + metric + "'");
    }
    const std::string variant = require(j, "recall_variant").get<std::string>();
    if (variant == "R40") {
      report.config.recall_points = RecallPoints::R40;
    } else if (variant == "R11") {
      report.config.recall_points = RecallPoints::R11;
    } else {
      throw Error(ErrorCode::UnsupportedFormat, "unknown recall variant '" + variant + "'");
    }
    report.config.iou_threshold = require(j, "iou_threshold").get<double>();
    if (j.contains("class")) report.config.cls = j.at("class").get<std::string>();
    const json& per = require(j, "per_difficulty");
    for (int d = 0; d < 3; ++d) {
      const json& entry = require(per, kDifficultyKeys[d]);
      report.per_difficulty[d].ap = require(entry, "ap").get<double>();
      for (const json& pt : require(entry, "pr")) {
        report.per_difficulty[d].points.emplace_back(pt.at(0).get<double>(), pt.at(1).get<double>());
      }
      if (entry.contains("num_gt")) report.num_gt[d] = entry.at("num_gt").get<int>();
    }
    return report;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::UnsupportedFormat, std::string("bad eval report: ") + e.what());
  }
}

std::string roundtrip_report_to_json(const RoundtripReport& report) {
  json j = {{"seed", report.seed},
            {"trials", report.trials},
            {"noise",
             {{"sigma_dims", report.noise.sigma_dims},
              {"sigma_rp", report.noise.sigma_rp},
              {"sigma_angle", report.noise.sigma_angle},
              {"occlusion_fraction", report.noise.occlusion_fraction}}},
            {"two_rp", to_json(report.two_rp)},
            {"eight_rp", to_json(report.eight_rp)}};
  return j.dump(2) + "\n";
}

}  // namespace rplift
