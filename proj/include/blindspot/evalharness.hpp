#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "blindspot/detlog.hpp"
#include "blindspot/error.hpp"
#include "blindspot/heatmap.hpp"
#include "blindspot/lbat.hpp"
#include "blindspot/parallel.hpp"
#include "blindspot/planner.hpp"
#include "blindspot/rng.hpp"

namespace blindspot {

// ===========================================================================
// Path-metric experiment: n_starts x n_ends queries between random admissible
// pixels, every planner on every query.

struct PathExperiment {
  int n_starts = 10;
  int n_ends = 10;
  std::uint64_t seed = 0;
  std::vector<PlannerKind> planners = {PlannerKind::lpet, PlannerKind::manhattan, PlannerKind::random};
};

struct QueryOutcome {
  PathQuery query;
  PlanStatus status = PlanStatus::no_solution;
  PathMetrics metrics;  // meaningful only when status == ok
  std::size_t length = 0;
};

struct PlannerSummary {
  PlannerKind planner = PlannerKind::lpet;
  // Averages over successful queries only; nullopt when none succeeded.
  std::optional<double> avg_bottleneck;
  std::optional<double> avg_mean_conf;
  std::size_t successes = 0;
  std::size_t failures = 0;
  std::vector<QueryOutcome> outcomes;
};

struct PathExperimentReport {
  Provenance provenance;
  std::uint64_t seed = 0;
  int n_starts = 0;
  int n_ends = 0;
  std::vector<PathQuery> queries;
  std::vector<PlannerSummary> planners;

  const PlannerSummary& summary(PlannerKind k) const {
    for (const auto& s : planners) {
      if (s.planner == k) return s;
    }
    throw Error(ErrorKind::invalid_argument, "planner not part of this report");
  }
};

// Starts and ends are drawn independently and uniformly from the admissible
// pixels; queries are every (start, end) pair, start-major.
inline std::vector<PathQuery> draw_queries(const GridGraph& g, const PathExperiment& exp) {
  if (g.empty()) throw Error(ErrorKind::invalid_argument, "heatmap has no admissible pixels");
  if (exp.n_starts <= 0 || exp.n_ends <= 0) {
    throw Error(ErrorKind::invalid_argument, "n_starts and n_ends must be positive");
  }
  const std::vector<Pixel> nodes = g.admissible_pixels();
  Rng rng(derive_seed(exp.seed, "paths:endpoints"));
  std::vector<Pixel> starts;
  std::vector<Pixel> ends;
  for (int i = 0; i < exp.n_starts; ++i) starts.push_back(nodes[rng.uniform_index(nodes.size())]);
  for (int i = 0; i < exp.n_ends; ++i) ends.push_back(nodes[rng.uniform_index(nodes.size())]);
  std::vector<PathQuery> queries;
  queries.reserve(starts.size() * ends.size());
  for (const Pixel& s : starts) {
    for (const Pixel& e : ends) queries.push_back({s, e});
  }
  return queries;
}

inline std::uint64_t planner_stream_seed(std::uint64_t seed, PlannerKind k, std::size_t query_index) {
  return derive_seed(seed, std::string("paths:") + std::string(to_string(k)), query_index);
}

inline PathExperimentReport run_path_queries(const GridGraph& g, const std::vector<PathQuery>& queries,
                                             const PathExperiment& exp, const Provenance& provenance = {}) {
  PathExperimentReport report;
  report.provenance = provenance;
  report.seed = exp.seed;
  report.n_starts = exp.n_starts;
  report.n_ends = exp.n_ends;
  report.queries = queries;

  for (PlannerKind k : exp.planners) {
    PlannerSummary s;
    s.planner = k;
    s.outcomes.resize(queries.size());
    parallel_chunks(queries.size(), worker_count(), [&](std::size_t begin, std::size_t end, unsigned) {
      for (std::size_t i = begin; i < end; ++i) {
        Rng rng(planner_stream_seed(exp.seed, k, i));
        const PlanResult r = plan(k, g, queries[i], rng);
        QueryOutcome& o = s.outcomes[i];
        o.query = queries[i];
        o.status = r.status;
        if (r.ok()) {
          o.metrics = r.path.metrics;
          o.length = r.path.pixels.size();
        }
      }
    });
    // Extended precision keeps the average of identical values exact.
    long double sum_bottleneck = 0.0L;
    long double sum_mean = 0.0L;
    for (const auto& o : s.outcomes) {
      if (o.status == PlanStatus::ok) {
        ++s.successes;
        sum_bottleneck += o.metrics.bottleneck;
        sum_mean += o.metrics.mean_conf;
      } else {
        ++s.failures;
      }
    }
    if (s.successes > 0) {
      s.avg_bottleneck = static_cast<double>(sum_bottleneck / s.successes);
      s.avg_mean_conf = static_cast<double>(sum_mean / s.successes);
    }
    report.planners.push_back(std::move(s));
  }
  return report;
}

inline PathExperimentReport run_path_experiment(const ConfidenceHeatmap& hc, const PathExperiment& exp) {
  const GridGraph g = build_graph(hc);
  return run_path_queries(g, draw_queries(g, exp), exp, hc.provenance);
}

struct PathExperimentPair {
  PathExperimentReport before;
  PathExperimentReport after;
};

// Same queries (drawn from the `before` heatmap) evaluated on both heatmaps.
inline PathExperimentPair run_path_experiment_pair(const ConfidenceHeatmap& before, const ConfidenceHeatmap& after,
                                                   const PathExperiment& exp) {
  if (before.width() != after.width() || before.height() != after.height()) {
    throw Error(ErrorKind::invalid_argument, "before/after heatmaps differ in size");
  }
  const GridGraph gb = build_graph(before);
  const GridGraph ga = build_graph(after);
  const auto queries = draw_queries(gb, exp);
  return {run_path_queries(gb, queries, exp, before.provenance), run_path_queries(ga, queries, exp, after.provenance)};
}

// Before: heatmap of the original log. After: heatmap rebuilt from the same
// log rescored against the before heatmap. Queries are shared.
inline PathExperimentPair run_lbat_path_experiment(const DetectionLog& log, const PathExperiment& exp) {
  const HeatmapPair before = generate_heatmaps(log);
  const DetectionLog rescored = rescore_log(log, before.confidence).as_detection_log();
  const HeatmapPair after = generate_heatmaps(rescored);
  return run_path_experiment_pair(before.confidence, after.confidence, exp);
}

// ===========================================================================
// Detector evaluation: one positive and one negative box per frame, scored
// by whatever boxes an evaluated detector produced in that frame.

struct DetectorEvalSample {
  std::int64_t frame_index = 0;
  BoundingBox positive;
  BoundingBox negative;
};

struct EvalSampleSet {
  std::vector<DetectorEvalSample> samples;
  std::size_t frames_without_person = 0;
  std::size_t skipped_frames = 0;  // no disjoint negative found within the attempt budget
};

inline constexpr int kNegativeAttempts = 256;

// Positive: the highest-confidence person box of the frame (first on ties).
// Negative: a rectangle sized like a random person box of the log, placed
// uniformly and redrawn until it touches no person box of the frame.
inline EvalSampleSet build_eval_samples(const DetectionLog& log, Rng& rng, int max_attempts = kNegativeAttempts) {
  EvalSampleSet out;
  std::vector<std::pair<int, int>> sizes;
  for (const auto& f : log.frames) {
    for (const auto& b : f.boxes) {
      if (b.is_person()) sizes.emplace_back(std::min(b.width(), log.width), std::min(b.height(), log.height));
    }
  }
  for (const auto& f : log.frames) {
    const BoundingBox* best = nullptr;
    for (const auto& b : f.boxes) {
      if (b.is_person() && (best == nullptr || b.confidence > best->confidence)) best = &b;
    }
    if (best == nullptr) {
      ++out.frames_without_person;
      continue;
    }
    std::optional<BoundingBox> negative;
    for (int attempt = 0; attempt < max_attempts && !negative; ++attempt) {
      const auto [w, h] = sizes[rng.uniform_index(sizes.size())];
      BoundingBox n;
      n.x1 = rng.uniform_int(0, log.width - w);
      n.y1 = rng.uniform_int(0, log.height - h);
      n.x2 = n.x1 + w - 1;
      n.y2 = n.y1 + h - 1;
      n.label = "background";
      const bool clear = std::none_of(f.boxes.begin(), f.boxes.end(),
                                      [&](const BoundingBox& b) { return b.is_person() && intersects(b, n); });
      if (clear) negative = n;
    }
    if (!negative) {
      ++out.skipped_frames;
      continue;
    }
    out.samples.push_back({f.frame_index, *best, *negative});
  }
  return out;
}

// Maps a (frame, region) to the confidence the detector assigns to it.
using Scorer = std::function<double(std::int64_t frame_index, const BoundingBox& region)>;

// Highest confidence among the log's person boxes in that frame that
// intersect the region; 0 when none does.
inline Scorer make_detector_scorer(const DetectionLog& log) {
  auto by_frame = std::make_shared<std::map<std::int64_t, std::vector<BoundingBox>>>();
  for (const auto& f : log.frames) {
    auto& boxes = (*by_frame)[f.frame_index];
    for (const auto& b : f.boxes) {
      if (b.is_person()) boxes.push_back(b);
    }
  }
  return [by_frame](std::int64_t frame_index, const BoundingBox& region) {
    auto it = by_frame->find(frame_index);
    if (it == by_frame->end()) return 0.0;
    double best = 0.0;
    for (const auto& b : it->second) {
      if (intersects(b, region)) best = std::max(best, b.confidence);
    }
    return best;
  };
}

// Same as make_detector_scorer, over confidences rescaled against `hc`.
inline Scorer make_lbat_scorer(const DetectionLog& log, const ConfidenceHeatmap& hc) {
  return make_detector_scorer(rescore_log(log, hc).as_detection_log());
}

// Probability that a random positive outscores a random negative, ties
// counted half. Midrank formulation, O(n log n).
inline double auc_rank(std::span<const double> positives, std::span<const double> negatives) {
  if (positives.empty() || negatives.empty()) {
    throw Error(ErrorKind::invalid_argument, "AUC undefined without both positive and negative samples");
  }
  std::vector<std::pair<double, bool>> all;
  all.reserve(positives.size() + negatives.size());
  for (double p : positives) all.emplace_back(p, true);
  for (double n : negatives) all.emplace_back(n, false);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  // Twice the midrank keeps everything integral.
  std::uint64_t twice_rank_sum = 0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    std::uint64_t pos_in_group = 0;
    while (j < all.size() && all[j].first == all[i].first) {
      pos_in_group += all[j].second ? 1 : 0;
      ++j;
    }
    // ranks i+1 .. j, midrank (i+1+j)/2
    twice_rank_sum += pos_in_group * static_cast<std::uint64_t>(i + 1 + j);
    i = j;
  }
  const auto np = static_cast<std::uint64_t>(positives.size());
  const auto nn = static_cast<std::uint64_t>(negatives.size());
  const std::uint64_t twice_u = twice_rank_sum - np * (np + 1);
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(np) * static_cast<double>(nn));
}

// Area under the empirical ROC curve by the trapezoid rule, sweeping the
// threshold through every distinct score.
inline double auc_trapezoid(std::span<const double> positives, std::span<const double> negatives) {
  if (positives.empty() || negatives.empty()) {
    throw Error(ErrorKind::invalid_argument, "AUC undefined without both positive and negative samples");
  }
  std::vector<std::pair<double, bool>> all;
  for (double p : positives) all.emplace_back(p, true);
  for (double n : negatives) all.emplace_back(n, false);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  const double np = static_cast<double>(positives.size());
  const double nn = static_cast<double>(negatives.size());
  double tp = 0.0;
  double fp = 0.0;
  double area = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    double dtp = 0.0;
    double dfp = 0.0;
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) {
      (all[j].second ? dtp : dfp) += 1.0;
      ++j;
    }
    const double tpr0 = tp / np;
    const double fpr0 = fp / nn;
    tp += dtp;
    fp += dfp;
    area += (fp / nn - fpr0) * (tp / np + tpr0) / 2.0;
    i = j;
  }
  return area;
}

struct DetectorEvalReport {
  double threshold = 0.5;
  double auc = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;
  double mean_tp_conf = 0.0;  // 0 when there is no true positive
  std::size_t tp = 0, fn = 0, fp = 0, tn = 0;
};

// A sample counts as detected when some box intersects it with confidence at
// or above the threshold.
inline bool detected(double score, double threshold) { return score > 0.0 && score >= threshold; }

inline DetectorEvalReport score_samples(std::span<const double> positive_scores,
                                        std::span<const double> negative_scores, double threshold) {
  DetectorEvalReport r;
  r.threshold = threshold;
  r.auc = auc_rank(positive_scores, negative_scores);
  double tp_conf = 0.0;
  for (double s : positive_scores) {
    if (detected(s, threshold)) {
      ++r.tp;
      tp_conf += s;
    } else {
      ++r.fn;
    }
  }
  for (double s : negative_scores) {
    if (detected(s, threshold)) {
      ++r.fp;
    } else {
      ++r.tn;
    }
  }
  r.tpr = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
  r.fpr = static_cast<double>(r.fp) / static_cast<double>(r.fp + r.tn);
  r.mean_tp_conf = r.tp > 0 ? tp_conf / static_cast<double>(r.tp) : 0.0;
  return r;
}

inline DetectorEvalReport score_samples(const std::vector<DetectorEvalSample>& samples, const Scorer& scorer,
                                        double threshold) {
  std::vector<double> pos;
  std::vector<double> neg;
  pos.reserve(samples.size());
  neg.reserve(samples.size());
  for (const auto& s : samples) {
    pos.push_back(scorer(s.frame_index, s.positive));
    neg.push_back(scorer(s.frame_index, s.negative));
  }
  return score_samples(pos, neg, threshold);
}

struct DetectorComparison {
  std::size_t samples = 0;
  std::size_t frames_without_person = 0;
  std::size_t skipped_frames = 0;
  DetectorEvalReport plain;
  std::optional<DetectorEvalReport> lbat;
};

// Samples come from `reference`; `evaluated` supplies the detections that are
// scored (pass the same log for a single-detector run). With a heatmap, the
// evaluated detections are also scored after rescaling.
inline DetectorComparison evaluate_detector(const DetectionLog& reference, const DetectionLog& evaluated,
                                            const ConfidenceHeatmap* lbat_heatmap, double threshold,
                                            std::uint64_t seed) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw Error(ErrorKind::invalid_argument, "threshold must lie in [0,1]");
  }
  if (reference.width != evaluated.width || reference.height != evaluated.height) {
    throw Error(ErrorKind::invalid_argument, "reference and evaluated logs cover different scene sizes");
  }
  Rng rng(derive_seed(seed, "eval:negatives"));
  const EvalSampleSet set = build_eval_samples(reference, rng);
  DetectorComparison out;
  out.samples = set.samples.size();
  out.frames_without_person = set.frames_without_person;
  out.skipped_frames = set.skipped_frames;
  out.plain = score_samples(set.samples, make_detector_scorer(evaluated), threshold);
  if (lbat_heatmap != nullptr) {
    out.lbat = score_samples(set.samples, make_lbat_scorer(evaluated, *lbat_heatmap), threshold);
  }
  return out;
}

// ===========================================================================
// Report rendering.

namespace detail {

inline nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

inline std::string fixed2(const std::optional<double>& v) {
  if (!v) return "n/a";
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << *v;
  return os.str();
}

inline std::string planner_column(PlannerKind k) {
  switch (k) {
    case PlannerKind::lpet: return "L-PET";
    case PlannerKind::manhattan: return "Man. Dist.";
    case PlannerKind::random: return "Random";
  }
  return "?";
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const PathExperimentReport& r, bool include_queries = true) {
  using ojson = nlohmann::ordered_json;
  ojson j;
  j["scene_id"] = r.provenance.scene_id;
  j["detector_id"] = r.provenance.detector_id;
  j["seed"] = r.seed;
  j["n_starts"] = r.n_starts;
  j["n_ends"] = r.n_ends;
  j["planners"] = ojson::array();
  for (const auto& s : r.planners) {
    ojson p;
    p["planner"] = std::string(to_string(s.planner));
    p["avg_bottleneck"] = detail::optional_json(s.avg_bottleneck);
    p["avg_mean_conf"] = detail::optional_json(s.avg_mean_conf);
    p["successes"] = s.successes;
    p["failures"] = s.failures;
    j["planners"].push_back(std::move(p));
  }
  if (include_queries) {
    j["queries"] = ojson::array();
    for (std::size_t i = 0; i < r.queries.size(); ++i) {
      ojson q;
      q["start"] = {r.queries[i].start.x, r.queries[i].start.y};
      q["end"] = {r.queries[i].end.x, r.queries[i].end.y};
      for (const auto& s : r.planners) {
        const QueryOutcome& o = s.outcomes[i];
        ojson m;
        m["status"] = std::string(to_string(o.status));
        if (o.status == PlanStatus::ok) {
          m["bottleneck"] = o.metrics.bottleneck;
          m["bottleneck_excl_start"] = o.metrics.bottleneck_excl_start;
          m["mean_conf"] = o.metrics.mean_conf;
          m["length"] = o.length;
        }
        q[std::string(to_string(s.planner))] = std::move(m);
      }
      j["queries"].push_back(std::move(q));
    }
  }
  return j;
}

// Rows are conditions (e.g. a scene, or before/after rescaling); columns are
// planners under "Max Confidence" and "Average Confidence".
inline std::string path_table(const std::vector<std::pair<std::string, const PathExperimentReport*>>& rows) {
  if (rows.empty()) return {};
  const auto& planners = rows.front().second->planners;
  std::size_t label_width = 9;
  for (const auto& [label, _] : rows) label_width = std::max(label_width, label.size());
  constexpr int kCol = 11;
  std::ostringstream os;
  const int group = kCol * static_cast<int>(planners.size());
  os << std::left << std::setw(static_cast<int>(label_width)) << "" << " | " << std::setw(group) << "Max Confidence"
     << " | " << std::setw(group) << "Average Confidence" << "\n";
  os << std::setw(static_cast<int>(label_width)) << "Condition" << " | ";
  for (const auto& s : planners) os << std::setw(kCol) << detail::planner_column(s.planner);
  os << " | ";
  for (const auto& s : planners) os << std::setw(kCol) << detail::planner_column(s.planner);
  os << "\n" << std::string(label_width + 6 + 2 * static_cast<std::size_t>(group), '-') << "\n";
  for (const auto& [label, report] : rows) {
    os << std::setw(static_cast<int>(label_width)) << label << " | ";
    for (const auto& s : report->planners) os << std::setw(kCol) << detail::fixed2(s.avg_bottleneck);
    os << " | ";
    for (const auto& s : report->planners) os << std::setw(kCol) << detail::fixed2(s.avg_mean_conf);
    os << "\n";
  }
  return os.str();
}

inline nlohmann::ordered_json to_json(const DetectorEvalReport& r) {
  nlohmann::ordered_json j;
  j["threshold"] = r.threshold;
  j["auc"] = r.auc;
  j["tpr"] = r.tpr;
  j["fpr"] = r.fpr;
  j["mean_tp_conf"] = r.mean_tp_conf;
  j["tp"] = r.tp;
  j["fn"] = r.fn;
  j["fp"] = r.fp;
  j["tn"] = r.tn;
  return j;
}

inline nlohmann::ordered_json to_json(const DetectorComparison& c) {
  nlohmann::ordered_json j;
  j["samples"] = c.samples;
  j["frames_without_person"] = c.frames_without_person;
  j["skipped_frames"] = c.skipped_frames;
  j["plain"] = to_json(c.plain);
  if (c.lbat) j["lbat"] = to_json(*c.lbat);
  return j;
}

inline std::string detector_table(const std::string& label, const DetectorComparison& c) {
  std::ostringstream os;
  auto f2 = [](double v) { return detail::fixed2(std::optional<double>(v)); };
  const bool both = c.lbat.has_value();
  std::size_t w = std::max<std::size_t>(label.size(), 9);
  os << std::left << std::setw(static_cast<int>(w)) << "" << " | " << std::setw(both ? 16 : 8) << "AUC" << " | "
     << std::setw(both ? 16 : 8) << "TPR" << " | " << std::setw(both ? 16 : 8) << "FPR" << " | "
     << std::setw(both ? 16 : 8) << "TP Conf." << "\n";
  os << std::setw(static_cast<int>(w)) << "Condition";
  for (int i = 0; i < 4; ++i) {
    os << " | " << std::setw(8) << "Plain";
    if (both) os << std::setw(8) << "L-BAT";
  }
  os << "\n" << std::string(w + (both ? 4 * 19 : 4 * 11), '-') << "\n";
  os << std::setw(static_cast<int>(w)) << label;
  const DetectorEvalReport& p = c.plain;
  const double plain_vals[] = {p.auc, p.tpr, p.fpr, p.mean_tp_conf};
  for (int i = 0; i < 4; ++i) {
    os << " | " << std::setw(8) << f2(plain_vals[i]);
    if (both) {
      const DetectorEvalReport& l = *c.lbat;
      const double lbat_vals[] = {l.auc, l.tpr, l.fpr, l.mean_tp_conf};
      os << std::setw(8) << f2(lbat_vals[i]);
    }
  }
  os << "\n";
  return os.str();
}

}  // namespace blindspot
