// blindspot: synthetic scenes, confidence heatmaps, L-PET paths, L-BAT
// rescoring and both evaluation harnesses behind one binary.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include <blindspot/blindspot.hpp>

namespace bs = blindspot;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitParse = 2;
constexpr int kExitProvenance = 3;
constexpr int kExitNoSolution = 4;

int exit_code(bs::ErrorKind kind) {
  switch (kind) {
    case bs::ErrorKind::parse:
    case bs::ErrorKind::out_of_bounds:
    case bs::ErrorKind::io: return kExitParse;
    case bs::ErrorKind::invalid_argument: return kExitInvalid;
    case bs::ErrorKind::provenance_mismatch: return kExitProvenance;
    case bs::ErrorKind::no_solution:
    case bs::ErrorKind::start_inadmissible:
    case bs::ErrorKind::end_inadmissible: return kExitNoSolution;
  }
  return kExitInvalid;
}

int report_error(std::string_view kind, std::string_view message, int code) {
  nlohmann::ordered_json j;
  j["error"] = std::string(kind);
  j["message"] = std::string(message);
  std::cerr << j.dump() << '\n';
  return code;
}

bs::Pixel parse_pixel(const std::string& text, const char* flag) {
  const auto comma = text.find(',');
  try {
    if (comma == std::string::npos) throw std::invalid_argument("no comma");
    std::size_t used_x = 0;
    std::size_t used_y = 0;
    const std::string xs = text.substr(0, comma);
    const std::string ys = text.substr(comma + 1);
    const int x = std::stoi(xs, &used_x);
    const int y = std::stoi(ys, &used_y);
    if (used_x != xs.size() || used_y != ys.size()) throw std::invalid_argument("trailing characters");
    return {x, y};
  } catch (const std::exception&) {
    throw bs::Error(bs::ErrorKind::invalid_argument, std::string(flag) + " expects x,y but got \"" + text + "\"");
  }
}

void write_text(const std::string& text, const std::optional<fs::path>& path) {
  if (!path) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(*path, std::ios::binary | std::ios::trunc);
  if (!out) throw bs::Error(bs::ErrorKind::io, "cannot open " + path->string() + " for writing");
  out << text;
  out.flush();
  if (!out) throw bs::Error(bs::ErrorKind::io, "write failure on " + path->string());
}

struct SynthArgs {
  std::string preset;
  std::string config;
  fs::path out;
  std::optional<std::uint64_t> seed;
};

int run_synth(const SynthArgs& a) {
  if (a.preset.empty() == a.config.empty()) {
    throw bs::Error(bs::ErrorKind::invalid_argument, "give exactly one of --preset or --config");
  }
  bs::ScenePreset scene = a.config.empty() ? bs::preset_scene(a.preset) : bs::read_scene_config_file(a.config);
  if (a.seed) scene.spec.seed = *a.seed;
  const bs::DetectionLog log = bs::simulate(scene.spec, scene.tracks, scene.model);
  bs::write_log_file(log, a.out);
  return kExitOk;
}

int run_heatmap_build(const fs::path& log_path, const fs::path& out) {
  const bs::DetectionLog log = bs::read_log_file(log_path);
  bs::save_heatmap_file(bs::generate_heatmaps(log).confidence, out);
  return kExitOk;
}

int run_heatmap_render(const fs::path& heatmap, const fs::path& png, const std::string& palette) {
  bs::write_png_file(bs::render_heatmap(bs::load_heatmap_file(heatmap), palette), png);
  return kExitOk;
}

struct PlanArgs {
  fs::path heatmap;
  std::string start;
  std::string end;
  std::string planner = "lpet";
  std::uint64_t seed = 0;
  std::optional<fs::path> out;
  std::optional<fs::path> overlay;
  std::string palette = "viridis";
};

int run_plan(const PlanArgs& a) {
  const bs::PlannerKind kind = bs::parse_planner(a.planner);
  const bs::PathQuery q{parse_pixel(a.start, "--start"), parse_pixel(a.end, "--end")};
  const bs::ConfidenceHeatmap hc = bs::load_heatmap_file(a.heatmap);
  const bs::GridGraph g = bs::build_graph(hc);
  bs::Rng rng(bs::derive_seed(a.seed, "plan:" + a.planner));
  const bs::PlanResult r = bs::plan(kind, g, q, rng);
  if (!r.ok()) {
    return report_error(bs::to_string(r.status), "planner " + a.planner + " found no path", kExitNoSolution);
  }
  write_text(bs::path_to_json(q, r.path, a.seed).dump() + "\n", a.out);
  if (a.overlay) {
    bs::RgbImage img = bs::render_heatmap(hc, a.palette);
    bs::overlay_path(img, r.path.pixels);
    bs::write_png_file(img, *a.overlay);
  }
  return kExitOk;
}

int run_lbat(const fs::path& log_path, const fs::path& heatmap, const fs::path& out) {
  const bs::DetectionLog log = bs::read_log_file(log_path);
  const bs::ConfidenceHeatmap hc = bs::load_heatmap_file(heatmap);
  bs::write_rescored_log_file(bs::rescore_log(log, hc), out);
  return kExitOk;
}

struct EvalPathsArgs {
  fs::path heatmap;
  std::optional<fs::path> heatmap_after;
  int n = 10;
  std::uint64_t seed = 0;
  std::string planners = "lpet,manhattan,random";
  std::optional<fs::path> out;
  bool quiet = false;
};

std::vector<bs::PlannerKind> parse_planner_list(const std::string& text) {
  std::vector<bs::PlannerKind> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    const bs::PlannerKind k = bs::parse_planner(item);
    for (bs::PlannerKind seen : out) {
      if (seen == k) throw bs::Error(bs::ErrorKind::invalid_argument, "planner listed twice: " + item);
    }
    out.push_back(k);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

int run_eval_paths(const EvalPathsArgs& a) {
  bs::PathExperiment exp;
  exp.n_starts = a.n;
  exp.n_ends = a.n;
  exp.seed = a.seed;
  exp.planners = parse_planner_list(a.planners);
  const bs::ConfidenceHeatmap before = bs::load_heatmap_file(a.heatmap);
  nlohmann::ordered_json j;
  std::string table;
  if (a.heatmap_after) {
    const bs::ConfidenceHeatmap after = bs::load_heatmap_file(*a.heatmap_after);
    const bs::PathExperimentPair pair = bs::run_path_experiment_pair(before, after, exp);
    j["before"] = bs::to_json(pair.before);
    j["after"] = bs::to_json(pair.after);
    table = bs::path_table({{"before", &pair.before}, {"after", &pair.after}});
  } else {
    const bs::PathExperimentReport r = bs::run_path_experiment(before, exp);
    j = bs::to_json(r);
    table = bs::path_table({{before.provenance.scene_id, &r}});
  }
  if (a.out) write_text(j.dump(2) + "\n", a.out);
  if (!a.quiet) std::cout << table;
  if (!a.out && a.quiet) std::cout << j.dump(2) << '\n';
  return kExitOk;
}

struct EvalDetectorArgs {
  fs::path log;
  std::optional<fs::path> eval_log;
  std::optional<fs::path> lbat_heatmap;
  double threshold = 0.5;
  std::uint64_t seed = 0;
  std::optional<fs::path> out;
  bool quiet = false;
};

int run_eval_detector(const EvalDetectorArgs& a) {
  const bs::DetectionLog reference = bs::read_log_file(a.log);
  std::optional<bs::DetectionLog> evaluated;
  if (a.eval_log) evaluated = bs::read_log_file(*a.eval_log);
  std::optional<bs::ConfidenceHeatmap> hc;
  if (a.lbat_heatmap) hc = bs::load_heatmap_file(*a.lbat_heatmap);
  const bs::DetectorComparison c = bs::evaluate_detector(reference, evaluated ? *evaluated : reference,
                                                         hc ? &*hc : nullptr, a.threshold, a.seed);
  const nlohmann::ordered_json j = bs::to_json(c);
  if (a.out) write_text(j.dump(2) + "\n", a.out);
  if (!a.quiet) std::cout << bs::detector_table(reference.provenance.scene_id, c);
  if (!a.out && a.quiet) std::cout << j.dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Detection blind-spot toolkit: heatmaps, L-PET planning, L-BAT rescoring"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "blindspot 0.1.0");

  SynthArgs synth;
  auto* cmd_synth = app.add_subcommand("synth-generate", "Simulate a scene and write its detection log");
  cmd_synth->add_option("--preset", synth.preset, "Preset name (crossing-day, crossing-night, corridor-occluded)");
  cmd_synth->add_option("--config", synth.config, "Scene config file")->check(CLI::ExistingFile);
  cmd_synth->add_option("--out", synth.out, "Output detection log (JSONL)")->required();
  cmd_synth->add_option("--seed", synth.seed, "Override the scene seed (presets default to 0)");

  fs::path hb_log;
  fs::path hb_out;
  auto* cmd_hb = app.add_subcommand("heatmap-build", "Build the confidence heatmap of a detection log");
  cmd_hb->add_option("--log", hb_log, "Detection log (JSONL)")->required();
  cmd_hb->add_option("--out", hb_out, "Output heatmap file")->required();

  fs::path hr_heatmap;
  fs::path hr_png;
  std::string hr_palette = "viridis";
  auto* cmd_hr = app.add_subcommand("heatmap-render", "Render a heatmap to PNG");
  cmd_hr->add_option("--heatmap", hr_heatmap, "Heatmap file")->required();
  cmd_hr->add_option("--png", hr_png, "Output PNG")->required();
  cmd_hr->add_option("--palette", hr_palette, "gray, viridis or inferno")->capture_default_str();

  PlanArgs pl;
  auto* cmd_plan = app.add_subcommand("plan", "Plan one path between two pixels");
  cmd_plan->add_option("--heatmap", pl.heatmap, "Heatmap file")->required();
  cmd_plan->add_option("--start", pl.start, "Start pixel x,y")->required();
  cmd_plan->add_option("--end", pl.end, "End pixel x,y")->required();
  cmd_plan->add_option("--planner", pl.planner, "lpet, manhattan or random")->capture_default_str();
  cmd_plan->add_option("--seed", pl.seed, "Seed for randomized planners")->capture_default_str();
  cmd_plan->add_option("--out", pl.out, "Path JSON (stdout if omitted)");
  cmd_plan->add_option("--overlay", pl.overlay, "Also write the heatmap with the path drawn on it");
  cmd_plan->add_option("--palette", pl.palette, "Palette for --overlay")->capture_default_str();

  fs::path lb_log;
  fs::path lb_heatmap;
  fs::path lb_out;
  auto* cmd_lbat = app.add_subcommand("lbat-rescore", "Rescale person detections by the local heatmap mean");
  cmd_lbat->add_option("--log", lb_log, "Detection log (JSONL)")->required();
  cmd_lbat->add_option("--heatmap", lb_heatmap, "Heatmap of the same scene and detector")->required();
  cmd_lbat->add_option("--out", lb_out, "Output rescored log")->required();

  EvalPathsArgs ep;
  auto* cmd_ep = app.add_subcommand("eval-paths", "Compare planners on random admissible queries");
  cmd_ep->add_option("--heatmap", ep.heatmap, "Heatmap file")->required();
  cmd_ep->add_option("--heatmap-after", ep.heatmap_after, "Second heatmap evaluated on the same queries");
  cmd_ep->add_option("--n", ep.n, "Number of starts and of ends (n x n queries)")->capture_default_str();
  cmd_ep->add_option("--seed", ep.seed, "Experiment seed")->capture_default_str();
  cmd_ep->add_option("--planners", ep.planners, "Comma-separated planner list")->capture_default_str();
  cmd_ep->add_option("--out", ep.out, "JSON report");
  cmd_ep->add_flag("--quiet", ep.quiet, "Skip the text table");

  EvalDetectorArgs ed;
  auto* cmd_ed = app.add_subcommand("eval-detector", "TPR/FPR/AUC of a detector, optionally with L-BAT");
  cmd_ed->add_option("--log", ed.log, "Reference log the samples are drawn from")->required();
  cmd_ed->add_option("--eval-log", ed.eval_log, "Log whose detections are scored (defaults to --log)");
  cmd_ed->add_option("--lbat-heatmap", ed.lbat_heatmap, "Heatmap for L-BAT rescoring");
  cmd_ed->add_option("--threshold", ed.threshold, "Detection threshold")->capture_default_str();
  cmd_ed->add_option("--seed", ed.seed, "Seed for negative sampling")->capture_default_str();
  cmd_ed->add_option("--out", ed.out, "JSON report");
  cmd_ed->add_flag("--quiet", ed.quiet, "Skip the text table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("InvalidArgument", e.what(), kExitInvalid);
  }

  try {
    if (*cmd_synth) return run_synth(synth);
    if (*cmd_hb) return run_heatmap_build(hb_log, hb_out);
    if (*cmd_hr) return run_heatmap_render(hr_heatmap, hr_png, hr_palette);
    if (*cmd_plan) return run_plan(pl);
    if (*cmd_lbat) return run_lbat(lb_log, lb_heatmap, lb_out);
    if (*cmd_ep) return run_eval_paths(ep);
    if (*cmd_ed) return run_eval_detector(ed);
  } catch (const bs::Error& e) {
    return report_error(bs::to_string(e.kind()), e.what(), exit_code(e.kind()));
  } catch (const std::exception& e) {
    return report_error("IoError", e.what(), kExitParse);
  }
  return kExitInvalid;
}
