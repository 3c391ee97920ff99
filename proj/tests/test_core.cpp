#include "mmhar/core.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <set>

using namespace mmhar;

TEST_CASE("labels are a fixed bijection with 0..14") {
  std::set<std::string_view> names;
  for (int i = 0; i < kNumClasses; ++i) {
    const ActionLabel l = label_from_index(i);
    CHECK(index_of(l) == i);
    CHECK(label_from_name(label_name(l)) == l);
    names.insert(label_name(l));
  }
  CHECK(names.size() == 15);
  CHECK(index_of(ActionLabel::Idle) == 14);
  CHECK_THROWS_AS(label_from_index(15), Error);
  CHECK_THROWS_AS(label_from_name("Juggling"), Error);
}

TEST_CASE("action profiles match the attribute table") {
  const auto& pinching = action_profile(ActionLabel::Pinching);
  CHECK(pinching.area == AreaLevel::Small);
  CHECK(pinching.pressure == AttrLevel::High);
  CHECK(pinching.frequency == AttrLevel::Medium);

  const auto& shaking = action_profile(ActionLabel::Shaking);
  CHECK(shaking.area == AreaLevel::Large);
  CHECK(shaking.pressure == AttrLevel::Medium);
  CHECK(shaking.frequency == AttrLevel::High);

  int all_none = 0;
  for (const auto& p : action_profiles()) {
    const bool none = p.area == AreaLevel::None && p.pressure == AttrLevel::None &&
                      p.frequency == AttrLevel::None;
    if (none) {
      ++all_none;
      CHECK(p.label == ActionLabel::Idle);
    }
  }
  CHECK(all_none == 1);
}

TEST_CASE("sensor configurations have the exact memberships") {
  auto letters = [](const SensorConfig& c) {
    std::string s;
    for (SensorId id : c.sensors) s += sensor_letter(id);
    return s;
  };
  CHECK(letters(sensor_config("8FG")) == "ABCDEFGH");
  CHECK(letters(sensor_config("4CPW")) == "BDFH");
  CHECK(letters(sensor_config("4CPB")) == "BDFG");
  CHECK(letters(sensor_config("3CP")) == "BDF");
  CHECK(letters(sensor_config("2TI")) == "BD");
  CHECK(letters(sensor_config("3TIB")) == "BDG");
  CHECK(letters(sensor_config("2WB")) == "GH");

  for (const auto& c : sensor_configs()) {
    CHECK(c.name.front() - '0' == c.size());  // leading digit == sensor count
  }
  CHECK_THROWS_AS(sensor_config("5XY"), Error);
}

TEST_CASE("feature widths") {
  CHECK(feature_width(sensor_config("8FG")) == 72);
  CHECK(feature_width(sensor_config("2WB")) == 18);
  CHECK(feature_width(sensor_config("3CP")) == 27);
}

TEST_CASE("channel indices select the canonical columns") {
  const auto full = channel_indices(sensor_config("8FG"));
  REQUIRE(full.size() == 72);
  for (int i = 0; i < 72; ++i) CHECK(full[static_cast<std::size_t>(i)] == i);

  std::vector<int> expected_2wb;
  for (int i = 54; i < 72; ++i) expected_2wb.push_back(i);
  CHECK(channel_indices(sensor_config("2WB")) == expected_2wb);

  std::vector<int> expected_2ti;
  for (int i = 9; i < 18; ++i) expected_2ti.push_back(i);
  for (int i = 27; i < 36; ++i) expected_2ti.push_back(i);
  CHECK(channel_indices(sensor_config("2TI")) == expected_2ti);
}

TEST_CASE("channel index count always equals the feature width") {
  for (const auto& c : sensor_configs()) {
    const auto idx = channel_indices(c);
    CHECK(static_cast<int>(idx.size()) == feature_width(c));
    CHECK(std::is_sorted(idx.begin(), idx.end()));
  }
}

TEST_CASE("masking a full matrix equals building the restriction") {
  Eigen::MatrixXd full(5, 72);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 72; ++j) full(i, j) = 100.0 * i + j;
  for (const auto& c : sensor_configs()) {
    const auto idx = channel_indices(c);
    for (int i = 0; i < 5; ++i)
      for (std::size_t k = 0; k < idx.size(); ++k)
        CHECK(full(i, idx[k]) == 100.0 * i + idx[k]);
  }
}

TEST_CASE("seventeen input modalities") {
  const auto all = all_modalities();
  REQUIRE(all.size() == 17);
  std::set<std::string> names;
  for (const auto& m : all) names.insert(m.name());
  CHECK(names.size() == 17);
  CHECK(names.count("MBC-8FG") == 1);
  CHECK(names.count("TBC-1top") == 1);
  CHECK(names.count("TBC-1bot") == 1);
  CHECK(names.count("TBC-2") == 1);
  CHECK(names.count("MMC-2WB") == 1);

  for (const auto& m : all) {
    const InputModality parsed = modality_from_name(m.name());
    CHECK(parsed.kind == m.kind);
    CHECK(parsed.name() == m.name());
    if (m.kind == ModalityKind::MBC || m.kind == ModalityKind::MMC)
      CHECK(m.config.has_value());
    else
      CHECK(!m.config.has_value());
  }
  CHECK_THROWS_AS(modality_from_name("TBC-3"), Error);
}
