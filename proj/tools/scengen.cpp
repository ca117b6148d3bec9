// scengen: grid-based multi-agent traffic scenario synthesis and evaluation
#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "scengen/errors.hpp"
#include "scengen/map_model.hpp"
#include "scengen/metrics.hpp"
#include "scengen/scenario_io.hpp"

namespace fs = std::filesystem;
using namespace scengen;

namespace {

std::vector<std::string> json_files_in(const std::string& dir) {
  std::vector<std::string> files;
  if (!fs::is_directory(dir)) return files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json")
      files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());
  return files;
}

// originals may be a single scenario file or a directory cycled per scenario
std::vector<std::pair<std::string, std::vector<OriginalTrack>>> load_originals(
    const std::string& path, double delta) {
  std::vector<std::pair<std::string, std::vector<OriginalTrack>>> sets;
  if (path.empty()) return sets;
  std::vector<std::string> files;
  if (fs::is_directory(path)) files = json_files_in(path);
  else files.push_back(path);
  if (files.empty()) throw ValidationError("originals: no scenario files in " + path);
  for (const std::string& f : files)
    sets.push_back({f, tracks_from_scenario(load_scenario(f), delta)});
  return sets;
}

// maps referenced by scenario files, resolved against the file's directory too
class MapCache {
 public:
  const MapModel* get(const std::string& ref, const std::string& scenario_path) {
    std::string path = ref;
    if (!fs::exists(path)) {
      fs::path near = fs::path(scenario_path).parent_path() / ref;
      if (fs::exists(near)) path = near.string();
    }
    auto it = maps_.find(path);
    if (it != maps_.end()) return it->second.get();
    auto loaded = std::make_unique<MapModel>(load_map(path));
    return maps_.emplace(path, std::move(loaded)).first->second.get();
  }

 private:
  std::map<std::string, std::unique_ptr<MapModel>> maps_;
};

int run_generate(RunConfig cfg) {
  validate(cfg);
  MapModel map = load_map(cfg.map_path);
  auto originals = load_originals(cfg.originals_path, cfg.sim.delta);
  fs::create_directories(cfg.out_dir);

  int n_workers = cfg.workers == 0
                      ? std::max(1u, std::thread::hardware_concurrency())
                      : cfg.workers;
  n_workers = std::min(n_workers, cfg.scenario_count);
  std::atomic<int> next{0};
  std::atomic<int> shortfalls{0};
  std::mutex err_mu;
  std::string first_error;

  auto work = [&]() {
    static const std::vector<OriginalTrack> none;
    for (;;) {
      int i = next.fetch_add(1);
      if (i >= cfg.scenario_count) return;
      try {
        const auto* set =
            originals.empty() ? nullptr : &originals[size_t(i) % originals.size()];
        GenerationOutput out = generate_one(map, cfg, i, set ? set->second : none,
                                            set ? set->first : std::string());
        char name[32];
        std::snprintf(name, sizeof name, "scenario_%05d.json", i);
        save_scenario(out.file, (fs::path(cfg.out_dir) / name).string());
        if (out.stats.spawn_shortfall > 0) shortfalls.fetch_add(1);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (first_error.empty()) first_error = e.what();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < n_workers; ++w) pool.emplace_back(work);
  for (std::thread& t : pool) t.join();

  if (!first_error.empty()) {
    std::cerr << "error: " << first_error << "\n";
    return 1;
  }
  std::cout << "wrote " << cfg.scenario_count << " scenarios to " << cfg.out_dir
            << "\n";
  if (shortfalls.load() > 0) {
    std::cerr << "warning: " << shortfalls.load()
              << " scenario(s) spawned fewer agents than requested\n";
    return 2;
  }
  return 0;
}

void spill_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DomainError("cannot write " + path);
  out << text;
}

struct DatasetEval {
  std::vector<ScenarioMetrics> per_scenario;
  std::vector<int> agent_counts;
  std::vector<std::string> labels;
  int n_agents = 0;
  int skipped = 0;
  std::vector<std::string> notes;
};

DatasetEval evaluate_dir(const std::string& dir, const MetricParams& params) {
  DatasetEval ev;
  MapCache maps;
  for (const std::string& file : json_files_in(dir)) {
    try {
      ScenarioFile s = load_scenario(file);
      const MapModel* map = maps.get(s.map_ref, file);
      ev.per_scenario.push_back(evaluate_scenario(eval_agents(s), *map, params));
      ev.agent_counts.push_back(int(s.agents.size()));
      ev.n_agents += int(s.agents.size());
      for (const ScenarioAgent& a : s.agents) ev.labels.push_back(a.policy);
    } catch (const std::exception& e) {
      ++ev.skipped;
      ev.notes.push_back(fs::path(file).filename().string() + ": " + e.what());
    }
  }
  return ev;
}

int run_evaluate(const std::string& data_dir, const std::string& out_path,
                 const RunConfig& cfg) {
  DatasetEval ev = evaluate_dir(data_dir, cfg.metrics);
  if (ev.per_scenario.empty()) {
    std::cerr << "error: no readable scenario files in " << data_dir << "\n";
    return 1;
  }
  EvalReport report;
  report.metrics = aggregate(ev.per_scenario);
  report.n_agents = ev.n_agents;
  report.skipped_files = ev.skipped;
  report.notes = ev.notes;
  report.config_echo = to_json_string(cfg);
  if (!out_path.empty()) spill_text(out_path, report_json(report));
  std::cout << report_table(report);
  return 0;
}

int run_ablate(RunConfig cfg, const std::string& which, const std::string& out_path) {
  RunConfig ablated = cfg;
  std::string variant;
  if (which == "topology") {
    ablated.sim.disable_topology = true;
    variant = "no-topology";
  } else if (which == "collision") {
    ablated.sim.disable_collision = true;
    variant = "no-collision";
  } else if (which == "smooth") {
    ablated.sim.disable_smoothing = true;
    variant = "no-smoothing";
  } else {
    std::cerr << "error: unknown ablation '" << which
              << "' (expected topology, collision, or smooth)\n";
    return 1;
  }
  validate(cfg);
  MapModel map = load_map(cfg.map_path);
  auto originals = load_originals(cfg.originals_path, cfg.sim.delta);
  static const std::vector<OriginalTrack> none;

  auto run_variant = [&](const RunConfig& c) {
    std::vector<ScenarioMetrics> per;
    for (int i = 0; i < c.scenario_count; ++i) {
      const auto* set =
          originals.empty() ? nullptr : &originals[size_t(i) % originals.size()];
      GenerationOutput out = generate_one(map, c, i, set ? set->second : none,
                                          set ? set->first : std::string());
      per.push_back(evaluate_scenario(eval_agents(out.file), map, c.metrics));
    }
    return aggregate(per);
  };
  DatasetMetrics base = run_variant(cfg);
  DatasetMetrics abl = run_variant(ablated);

  char line[160];
  std::snprintf(line, sizeof line, "%-14s %7s %7s %7s %7s %7s\n", "variant", "LO",
                "LA", "JE", "SCR", "ORR");
  std::cout << line;
  auto row = [&](const std::string& name, const DatasetMetrics& m) {
    std::snprintf(line, sizeof line, "%-14s %7.3f %7.3f %7.3f %7.3f %7.3f\n",
                  name.c_str(), m.lo, m.la, m.je, m.scr, m.orr);
    std::cout << line;
  };
  row("baseline", base);
  row(variant, abl);

  if (!out_path.empty()) {
    std::ostringstream json;
    auto obj = [](const DatasetMetrics& m) {
      std::ostringstream o;
      o << "{\"lo\": " << m.lo << ", \"la\": " << m.la << ", \"je\": " << m.je
        << ", \"scr\": " << m.scr << ", \"orr\": " << m.orr << "}";
      return o.str();
    };
    json << "{\n  \"which\": \"" << which << "\",\n  \"baseline\": " << obj(base)
         << ",\n  \"ablated\": " << obj(abl) << "\n}\n";
    spill_text(out_path, json.str());
  }
  return 0;
}

int run_stats(const std::string& data_dir, const std::string& out_path) {
  std::vector<int> counts;
  std::vector<std::string> labels;
  for (const std::string& file : json_files_in(data_dir)) {
    try {
      ScenarioFile s = load_scenario(file);
      counts.push_back(int(s.agents.size()));
      for (const ScenarioAgent& a : s.agents) labels.push_back(a.policy);
    } catch (const std::exception& e) {
      std::cerr << "warning: skipping " << file << ": " << e.what() << "\n";
    }
  }
  if (counts.empty()) {
    std::cerr << "error: no readable scenario files in " << data_dir << "\n";
    return 1;
  }
  Histogram density = density_histogram(counts);
  Histogram behavior = behavior_histogram(labels);
  std::cout << histogram_table(density, behavior);
  spill_text(out_path, histogram_csv(density, behavior));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"grid-based traffic scenario synthesizer"};
  app.require_subcommand(1);

  std::string config_path, map_path, originals_path, out_path, data_dir, which;
  int count = -1;
  int workers = -1;
  std::uint64_t seed = 0;
  bool seed_set = false;

  CLI::App* gen = app.add_subcommand("generate", "synthesize scenario files");
  gen->add_option("--config", config_path, "run config (json)");
  gen->add_option("--map", map_path, "map file, overrides config");
  gen->add_option("--originals", originals_path,
                  "recorded scenario file or directory to replay");
  gen->add_option("--out", out_path, "output directory");
  gen->add_option("-n,--count", count, "scenario count");
  gen->add_option("--seed", seed, "base seed")->each([&](const std::string&) {
    seed_set = true;
  });
  gen->add_option("--workers", workers, "worker threads (0 = all cores)");

  CLI::App* ev = app.add_subcommand("evaluate", "compute dataset metrics");
  ev->add_option("--data", data_dir, "scenario directory")->required();
  ev->add_option("--out", out_path, "report file (json)");
  ev->add_option("--config", config_path, "run config (json)");

  CLI::App* ab = app.add_subcommand("ablate", "paired baseline/ablated comparison");
  ab->add_option("--config", config_path, "run config (json)")->required();
  ab->add_option("--which", which, "topology|collision|smooth")->required();
  ab->add_option("--out", out_path, "comparison file (json)");
  ab->add_option("-n,--count", count, "scenario count override");

  CLI::App* st = app.add_subcommand("stats", "distribution histograms");
  st->add_option("--data", data_dir, "scenario directory")->required();
  st->add_option("--out", out_path, "plot-ready csv path");

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_run_config(config_path);
    if (app.got_subcommand(gen)) {
      if (!map_path.empty()) cfg.map_path = map_path;
      if (!originals_path.empty()) cfg.originals_path = originals_path;
      if (!out_path.empty()) cfg.out_dir = out_path;
      if (count >= 0) cfg.scenario_count = count;
      if (workers >= 0) cfg.workers = workers;
      if (seed_set) cfg.seed = seed;
      return run_generate(cfg);
    }
    if (app.got_subcommand(ev)) return run_evaluate(data_dir, out_path, cfg);
    if (app.got_subcommand(ab)) {
      if (count >= 0) cfg.scenario_count = count;
      return run_ablate(cfg, which, out_path);
    }
    if (app.got_subcommand(st))
      return run_stats(data_dir, out_path.empty() ? "stats.csv" : out_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
