// Declarative key=value run configuration. Unknown keys are rejected; every
// command writes its resolved configuration next to its outputs so a run is
// reproducible from that file and the seed alone.
#pragma once

#include "mmhar/common.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace mmhar {

struct RunConfig {
  std::uint64_t seed = 42;
  std::string preset = "desk";  // desk | paper
  std::string dataset_dir = "data/synth";
  std::string run_dir = "runs/run";
  std::string modality = "all17";

  // generation
  int participants = 1;
  double segment_seconds = 12.0;
  int image_size = 56;
  double imu_rate = 40.0;
  double camera_rate = 30.0;
  int marker_rows = 12;
  int marker_cols = 8;
  double noise_std = 0.02;
  double clock_jitter_std = 0.002;
  bool continuous = false;
  int continuous_actions = 15;
  double action_seconds = 4.0;
  double pause_seconds = 2.0;

  // training
  double learning_rate = 3e-4;
  int batch_size = 8;
  int max_epochs = 200;
  int patience = 20;
  std::string stats_source = "per_split";  // per_split | train_only

  // benchmarking / streaming
  int repetitions = 40;
  int workers = 2;
  std::string stream_recording;

  void validate() const {
    if (preset != "desk" && preset != "paper") throw ConfigError("preset must be desk or paper");
    if (stats_source != "per_split" && stats_source != "train_only")
      throw ConfigError("stats_source must be per_split or train_only");
    if (participants < 1) throw ConfigError("participants must be >= 1");
    if (!(segment_seconds > 0.0)) throw ConfigError("segment_seconds must be positive");
    if (workers < 1) throw ConfigError("workers must be >= 1");
  }

  void set(const std::string& key, const std::string& value) {
    auto as_int = [&] { return std::stoi(value); };
    auto as_double = [&] { return std::stod(value); };
    auto as_bool = [&] {
      if (value == "true" || value == "1") return true;
      if (value == "false" || value == "0") return false;
      throw ConfigError("boolean key '" + key + "' needs true/false, got '" + value + "'");
    };
    if (key == "seed") seed = std::stoull(value);
    else if (key == "preset") preset = value;
    else if (key == "dataset_dir") dataset_dir = value;
    else if (key == "run_dir") run_dir = value;
    else if (key == "modality") modality = value;
    else if (key == "participants") participants = as_int();
    else if (key == "segment_seconds") segment_seconds = as_double();
    else if (key == "image_size") image_size = as_int();
    else if (key == "imu_rate") imu_rate = as_double();
    else if (key == "camera_rate") camera_rate = as_double();
    else if (key == "marker_rows") marker_rows = as_int();
    else if (key == "marker_cols") marker_cols = as_int();
    else if (key == "noise_std") noise_std = as_double();
    else if (key == "clock_jitter_std") clock_jitter_std = as_double();
    else if (key == "continuous") continuous = as_bool();
    else if (key == "continuous_actions") continuous_actions = as_int();
    else if (key == "action_seconds") action_seconds = as_double();
    else if (key == "pause_seconds") pause_seconds = as_double();
    else if (key == "learning_rate") learning_rate = as_double();
    else if (key == "batch_size") batch_size = as_int();
    else if (key == "max_epochs") max_epochs = as_int();
    else if (key == "patience") patience = as_int();
    else if (key == "stats_source") stats_source = value;
    else if (key == "repetitions") repetitions = as_int();
    else if (key == "workers") workers = as_int();
    else if (key == "stream_recording") stream_recording = value;
    else throw ConfigError("unknown config key: '" + key + "'");
  }

  static RunConfig parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config: " + path.string());
    RunConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        const auto b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
      };
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("malformed line " + std::to_string(line_no) + " in " + path.string());
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    cfg.validate();
    return cfg;
  }

  std::string resolved_text() const {
    std::ostringstream out;
    out << "seed = " << seed << "\n";
    out << "preset = " << preset << "\n";
    out << "dataset_dir = " << dataset_dir << "\n";
    out << "run_dir = " << run_dir << "\n";
    out << "modality = " << modality << "\n";
    out << "participants = " << participants << "\n";
    out << "segment_seconds = " << segment_seconds << "\n";
    out << "image_size = " << image_size << "\n";
    out << "imu_rate = " << imu_rate << "\n";
    out << "camera_rate = " << camera_rate << "\n";
    out << "marker_rows = " << marker_rows << "\n";
    out << "marker_cols = " << marker_cols << "\n";
    out << "noise_std = " << noise_std << "\n";
    out << "clock_jitter_std = " << clock_jitter_std << "\n";
    out << "continuous = " << (continuous ? "true" : "false") << "\n";
    out << "continuous_actions = " << continuous_actions << "\n";
    out << "action_seconds = " << action_seconds << "\n";
    out << "pause_seconds = " << pause_seconds << "\n";
    out << "learning_rate = " << learning_rate << "\n";
    out << "batch_size = " << batch_size << "\n";
    out << "max_epochs = " << max_epochs << "\n";
    out << "patience = " << patience << "\n";
    out << "stats_source = " << stats_source << "\n";
    out << "repetitions = " << repetitions << "\n";
    out << "workers = " << workers << "\n";
    out << "stream_recording = " << stream_recording << "\n";
    return out.str();
  }

  void write_resolved(const std::filesystem::path& path) const {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write resolved config: " + path.string());
    out << resolved_text();
  }
};

}  // namespace mmhar
