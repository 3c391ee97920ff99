// Domain vocabulary: the 15 action labels with their contact attributes, the
// 8 glove sensors, the 7 glove configurations and the channel-layout algebra
// shared by every other module.
//
// Canonical full-glove feature layout: sensor-major A..H, within each sensor
// accel(x,y,z), gyro(x,y,z), mag(x,y,z) -> 72 columns.
#pragma once

#include "mmhar/common.hpp"

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mmhar {

constexpr int kNumClasses = 15;
constexpr int kNumSensors = 8;
constexpr int kChannelsPerSensor = 9;  // 3 accel + 3 gyro + 3 mag
constexpr int kFullGloveWidth = kNumSensors * kChannelsPerSensor;

enum class ActionLabel : int {
  Pinching = 0,
  Pulling,
  Pushing,
  Rubbing,
  Patting,
  Tapping,
  Scratching,
  Lingering,
  Massaging,
  Squeezing,
  Trembling,
  Shaking,
  Stroking,
  Poking,
  Idle,
};

constexpr int index_of(ActionLabel l) { return static_cast<int>(l); }

inline ActionLabel label_from_index(int idx) {
  if (idx < 0 || idx >= kNumClasses) throw Error("label index out of range: " + std::to_string(idx));
  return static_cast<ActionLabel>(idx);
}

inline const std::array<std::string_view, kNumClasses>& label_names() {
  static const std::array<std::string_view, kNumClasses> names = {
      "Pinching",  "Pulling",   "Pushing",  "Rubbing",  "Patting",
      "Tapping",   "Scratching", "Lingering", "Massaging", "Squeezing",
      "Trembling", "Shaking",   "Stroking", "Poking",   "Idle"};
  return names;
}

inline std::string_view label_name(ActionLabel l) { return label_names()[index_of(l)]; }

inline ActionLabel label_from_name(std::string_view name) {
  for (int i = 0; i < kNumClasses; ++i)
    if (label_names()[i] == name) return static_cast<ActionLabel>(i);
  throw Error("unknown action label: " + std::string(name));
}

enum class AttrLevel : int { Low = 0, Medium = 1, High = 2, None = 3 };
enum class AreaLevel : int { Small = 0, Medium = 1, Large = 2, None = 3 };

struct ActionProfile {
  ActionLabel label;
  AreaLevel area;
  AttrLevel pressure;
  AttrLevel frequency;
};

// Contact attributes per action. Idle is the only label with all three None.
inline const std::array<ActionProfile, kNumClasses>& action_profiles() {
  using L = ActionLabel;
  using A = AreaLevel;
  using P = AttrLevel;
  static const std::array<ActionProfile, kNumClasses> table = {{
      {L::Pinching, A::Small, P::High, P::Medium},
      {L::Pulling, A::Large, P::High, P::Low},
      {L::Pushing, A::Large, P::High, P::Low},
      {L::Rubbing, A::Medium, P::Medium, P::High},
      {L::Patting, A::Large, P::Medium, P::High},
      {L::Tapping, A::Medium, P::Medium, P::High},
      {L::Scratching, A::Small, P::Low, P::High},
      {L::Lingering, A::Medium, P::Low, P::Low},
      {L::Massaging, A::Large, P::Medium, P::Medium},
      {L::Squeezing, A::Large, P::High, P::Low},
      {L::Trembling, A::Small, P::Low, P::Medium},
      {L::Shaking, A::Large, P::Medium, P::High},
      {L::Stroking, A::Medium, P::Low, P::Medium},
      {L::Poking, A::Small, P::Medium, P::Medium},
      {L::Idle, A::None, P::None, P::None},
  }};
  return table;
}

inline const ActionProfile& action_profile(ActionLabel l) { return action_profiles()[index_of(l)]; }

enum class SensorId : int { A = 0, B, C, D, E, F, G, H };

inline char sensor_letter(SensorId s) { return static_cast<char>('A' + static_cast<int>(s)); }

// Placement is metadata only; no computation depends on it.
inline std::string_view sensor_placement(SensorId s) {
  static const std::array<std::string_view, kNumSensors> placements = {
      "thumb proximal",  "thumb distal",        "index proximal", "index intermediate",
      "middle proximal", "middle intermediate", "hand back",      "wrist"};
  return placements[static_cast<int>(s)];
}

struct SensorConfig {
  std::string name;
  std::vector<SensorId> sensors;  // ascending A..H order

  int size() const { return static_cast<int>(sensors.size()); }
};

inline const std::array<SensorConfig, 7>& sensor_configs() {
  using S = SensorId;
  static const std::array<SensorConfig, 7> table = {{
      {"8FG", {S::A, S::B, S::C, S::D, S::E, S::F, S::G, S::H}},
      {"4CPW", {S::B, S::D, S::F, S::H}},
      {"4CPB", {S::B, S::D, S::F, S::G}},
      {"3CP", {S::B, S::D, S::F}},
      {"2TI", {S::B, S::D}},
      {"3TIB", {S::B, S::D, S::G}},
      {"2WB", {S::G, S::H}},
  }};
  return table;
}

inline const SensorConfig& sensor_config(std::string_view name) {
  for (const auto& c : sensor_configs())
    if (c.name == name) return c;
  throw Error("unknown sensor configuration: " + std::string(name));
}

inline int feature_width(const SensorConfig& config) {
  return kChannelsPerSensor * config.size();
}

// Column indices into the 72-wide full-glove matrix retained by `config`,
// ascending. 8FG is the identity selection.
inline std::vector<int> channel_indices(const SensorConfig& config) {
  std::vector<int> idx;
  idx.reserve(static_cast<std::size_t>(feature_width(config)));
  for (SensorId s : config.sensors) {
    const int base = static_cast<int>(s) * kChannelsPerSensor;
    for (int k = 0; k < kChannelsPerSensor; ++k) idx.push_back(base + k);
  }
  return idx;
}

enum class ModalityKind { MBC, TBC1Top, TBC1Bot, TBC2, MMC };

struct InputModality {
  ModalityKind kind;
  std::optional<SensorConfig> config;  // present for MBC/MMC only

  bool needs_imu() const { return kind == ModalityKind::MBC || kind == ModalityKind::MMC; }
  bool needs_top() const { return kind != ModalityKind::MBC && kind != ModalityKind::TBC1Bot; }
  bool needs_bottom() const { return kind != ModalityKind::MBC && kind != ModalityKind::TBC1Top; }

  std::string name() const {
    switch (kind) {
      case ModalityKind::MBC: return "MBC-" + config->name;
      case ModalityKind::TBC1Top: return "TBC-1top";
      case ModalityKind::TBC1Bot: return "TBC-1bot";
      case ModalityKind::TBC2: return "TBC-2";
      case ModalityKind::MMC: return "MMC-" + config->name;
    }
    throw Error("invalid modality kind");
  }
};

inline InputModality modality_from_name(std::string_view name) {
  if (name == "TBC-1top") return {ModalityKind::TBC1Top, std::nullopt};
  if (name == "TBC-1bot") return {ModalityKind::TBC1Bot, std::nullopt};
  if (name == "TBC-2") return {ModalityKind::TBC2, std::nullopt};
  if (name.rfind("MBC-", 0) == 0) return {ModalityKind::MBC, sensor_config(name.substr(4))};
  if (name.rfind("MMC-", 0) == 0) return {ModalityKind::MMC, sensor_config(name.substr(4))};
  throw Error("unknown modality: " + std::string(name));
}

// The 17 evaluated input configurations in reporting order: 7 MBC, 3 TBC, 7 MMC.
inline std::vector<InputModality> all_modalities() {
  std::vector<InputModality> out;
  for (const auto& c : sensor_configs()) out.push_back({ModalityKind::MBC, c});
  out.push_back({ModalityKind::TBC1Top, std::nullopt});
  out.push_back({ModalityKind::TBC1Bot, std::nullopt});
  out.push_back({ModalityKind::TBC2, std::nullopt});
  for (const auto& c : sensor_configs()) out.push_back({ModalityKind::MMC, c});
  return out;
}

}  // namespace mmhar
