#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "liefpf/scenario.hpp"
#include "liefpf/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

liefpf::ScenarioConfig load_config(const std::string& path, bool seed_set, std::uint64_t seed) {
  liefpf::ScenarioConfig cfg = liefpf::parse_config(read_file(path));
  if (seed_set) cfg.seed = seed;
  return cfg;
}

bool numbers_close(double a, double b, double tol) {
  if (std::isnan(a) && std::isnan(b)) return true;
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

void json_differences(const json& a, const json& b, double tol, const std::string& path,
                      std::vector<std::string>& diffs) {
  if (diffs.size() >= 20) return;
  if (a.is_number() && b.is_number()) {
    if (!numbers_close(a.get<double>(), b.get<double>(), tol)) {
      diffs.push_back(path + ": " + a.dump() + " vs " + b.dump());
    }
    return;
  }
  if (a.type() != b.type()) {
    diffs.push_back(path + ": type mismatch");
    return;
  }
  if (a.is_object()) {
    for (const auto& item : a.items()) {
      if (!b.contains(item.key())) {
        diffs.push_back(path + "." + item.key() + ": missing on right");
        continue;
      }
      json_differences(item.value(), b[item.key()], tol, path + "." + item.key(), diffs);
    }
    for (const auto& item : b.items()) {
      if (!a.contains(item.key())) diffs.push_back(path + "." + item.key() + ": missing on left");
    }
    return;
  }
  if (a.is_array()) {
    if (a.size() != b.size()) {
      diffs.push_back(path + ": array length " + std::to_string(a.size()) + " vs " +
                      std::to_string(b.size()));
      return;
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
      json_differences(a[i], b[i], tol, path + "[" + std::to_string(i) + "]", diffs);
    }
    return;
  }
  if (a != b) diffs.push_back(path + ": " + a.dump() + " vs " + b.dump());
}

void csv_differences(const std::string& a, const std::string& b, double tol,
                     std::vector<std::string>& diffs) {
  std::stringstream sa(a), sb(b);
  std::string la, lb;
  std::size_t line = 0;
  while (true) {
    const bool ga = static_cast<bool>(std::getline(sa, la));
    const bool gb = static_cast<bool>(std::getline(sb, lb));
    ++line;
    if (!ga && !gb) return;
    if (ga != gb) {
      diffs.push_back("line " + std::to_string(line) + ": row counts differ");
      return;
    }
    if (la == lb) continue;
    std::stringstream ca(la), cb(lb);
    std::string xa, xb;
    std::size_t col = 0;
    while (diffs.size() < 20) {
      const bool ha = static_cast<bool>(std::getline(ca, xa, ','));
      const bool hb = static_cast<bool>(std::getline(cb, xb, ','));
      ++col;
      if (!ha && !hb) break;
      const std::string where =
          "line " + std::to_string(line) + " col " + std::to_string(col);
      if (ha != hb) {
        diffs.push_back(where + ": column counts differ");
        break;
      }
      if (xa == xb) continue;
      try {
        std::size_t pa = 0, pb = 0;
        const double va = std::stod(xa, &pa);
        const double vb = std::stod(xb, &pb);
        if (pa == xa.size() && pb == xb.size() && numbers_close(va, vb, tol)) continue;
      } catch (const std::exception&) {
      }
      diffs.push_back(where + ": '" + xa + "' vs '" + xb + "'");
    }
    if (diffs.size() >= 20) return;
  }
}

/// Compare one pair of files; returns true when equivalent within tol.
bool compare_files(const std::string& a, const std::string& b, double tol) {
  const std::string ta = read_file(a);
  const std::string tb = read_file(b);
  if (ta == tb) {
    std::cout << "[PASS] " << a << " == " << b << " (byte-identical)\n";
    return true;
  }
  std::vector<std::string> diffs;
  if (fs::path(a).extension() == ".json") {
    json ja, jb;
    try {
      ja = json::parse(ta);
      jb = json::parse(tb);
    } catch (const json::exception& e) {
      std::cout << "[FAIL] " << a << " vs " << b << ": not comparable as JSON: " << e.what()
                << "\n";
      return false;
    }
    json_differences(ja, jb, tol, "$", diffs);
  } else {
    csv_differences(ta, tb, tol, diffs);
  }
  if (diffs.empty()) {
    std::cout << "[PASS] " << a << " ~= " << b << " (within tol " << tol << ")\n";
    return true;
  }
  std::cout << "[FAIL] " << a << " vs " << b << ":\n";
  for (const std::string& d : diffs) std::cout << "  " << d << "\n";
  return false;
}

int run_compare(const std::string& a, const std::string& b, double tol) {
  if (fs::is_directory(a) && fs::is_directory(b)) {
    // timings.json is wall-clock and deliberately excluded.
    const char* names[] = {"fpf_steps.csv", "grid_steps.csv", "sir_steps.csv", "summary.json"};
    bool all_ok = true;
    std::size_t compared = 0;
    for (const char* name : names) {
      const fs::path pa = fs::path(a) / name;
      const fs::path pb = fs::path(b) / name;
      const bool ea = fs::exists(pa), eb = fs::exists(pb);
      if (!ea && !eb) continue;
      if (ea != eb) {
        std::cout << "[FAIL] " << name << " present on one side only\n";
        all_ok = false;
        continue;
      }
      ++compared;
      all_ok = compare_files(pa.string(), pb.string(), tol) && all_ok;
    }
    if (compared == 0) {
      std::cout << "[FAIL] no comparable run outputs found\n";
      return 1;
    }
    return all_ok ? 0 : 1;
  }
  return compare_files(a, b, tol) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feedback particle filtering on SO(2) and SO(3)"};
  app.set_version_flag("--version", std::string(liefpf::kVersion));
  app.require_subcommand(1);

  std::string config_path, out_path, trajectory_path;
  std::uint64_t seed = 0;
  int threads = 1;
  double tol = 0.0;
  std::string cmp_a, cmp_b;

  CLI::App* generate = app.add_subcommand("generate", "Simulate a truth trajectory + observations");
  generate->add_option("--config", config_path, "Scenario config JSON")
      ->required()
      ->check(CLI::ExistingFile);
  generate->add_option("--out", out_path, "Output trajectory CSV")->required();
  generate->add_option("--seed", seed, "Override the config seed");

  CLI::App* run = app.add_subcommand("run", "Run the configured filters on a trajectory");
  run->add_option("--config", config_path, "Scenario config JSON")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("--trajectory", trajectory_path, "Trajectory CSV from 'generate'")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("--out", out_path, "Output directory")->required();
  run->add_option("--seed", seed, "Override the config seed");
  run->add_option("--threads", threads, "Worker threads for per-particle maps")
      ->check(CLI::Range(1, 256));

  CLI::App* compare = app.add_subcommand("compare", "Compare two run outputs (dirs or files)");
  compare->add_option("a", cmp_a, "First output dir / file")->required();
  compare->add_option("b", cmp_b, "Second output dir / file")->required();
  compare->add_option("--tol", tol, "Relative tolerance for numeric fields (0 = exact)");

  CLI::App* validate = app.add_subcommand("validate", "Check a config and print its hashes");
  validate->add_option("--config", config_path, "Scenario config JSON")
      ->required()
      ->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) {
      const liefpf::ScenarioConfig cfg =
          load_config(config_path, generate->count("--seed") > 0, seed);
      liefpf::require_valid(cfg);
      const liefpf::TruthPath path = liefpf::generate_truth(cfg);
      liefpf::write_trajectory_csv(path, out_path);
      std::cout << "wrote " << path.times.size() << " steps to " << out_path << "\n"
                << "generation_hash: " << path.generation_hash << "\n";
      return 0;
    }
    if (run->parsed()) {
      const liefpf::ScenarioConfig cfg = load_config(config_path, run->count("--seed") > 0, seed);
      liefpf::require_valid(cfg);
      const liefpf::TruthPath path = liefpf::read_trajectory_csv(trajectory_path);
      const liefpf::ScenarioResult result = liefpf::run_scenario(cfg, path, out_path, threads);
      std::cout << "fpf mean error vs truth: " << result.metrics.fpf_mean_error << "\n";
      if (cfg.grid.enabled) {
        std::cout << "fpf vs grid mean |moment diff|: sin "
                  << result.metrics.fpf_vs_grid_mean_abs_diff_sin << ", cos "
                  << result.metrics.fpf_vs_grid_mean_abs_diff_cos << "\n";
      }
      if (cfg.sir.enabled) {
        std::cout << "fpf vs sir mean geodesic: " << result.metrics.fpf_vs_sir_mean_geodesic
                  << "\n";
      }
      std::cout << "outputs in " << out_path << "\n";
      return 0;
    }
    if (compare->parsed()) return run_compare(cmp_a, cmp_b, tol);
    if (validate->parsed()) {
      liefpf::ScenarioConfig cfg;
      try {
        cfg = liefpf::parse_config(read_file(config_path));
      } catch (const std::exception& e) {
        std::cout << "[FAIL] config parses: " << e.what() << "\n";
        return 1;
      }
      std::cout << "[PASS] config parses\n";
      const std::vector<std::string> problems = liefpf::validate_config(cfg);
      for (const std::string& p : problems) std::cout << "[FAIL] " << p << "\n";
      if (!problems.empty()) return 1;
      std::cout << "[PASS] semantic checks\n"
                << "config_hash: " << liefpf::config_hash(cfg) << "\n"
                << "generation_hash: " << liefpf::generation_hash(cfg) << "\n"
                << "steps: " << cfg.step_count() << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
