#include "mmhar/pipeline.hpp"

#include "mmhar/synthgen.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <map>

using namespace mmhar;

namespace {

GenParams desk_params(std::uint64_t seed = 7) {
  GenParams p;
  p.seed = seed;
  p.image_size = 56;
  return p;
}

GenParams exact_clock(std::uint64_t seed = 7) {
  GenParams p = desk_params(seed);
  p.clock_jitter_std = 0.0;
  return p;
}

Recording tiny_recording(const std::vector<double>& imu_t, const std::vector<double>& frame_t) {
  Recording rec;
  rec.meta.id = "tiny";
  rec.imu.t = imu_t;
  rec.imu.values.resize(static_cast<Eigen::Index>(imu_t.size()), kFullGloveWidth);
  for (std::size_t i = 0; i < imu_t.size(); ++i)
    rec.imu.values.row(static_cast<Eigen::Index>(i)).setConstant(static_cast<double>(i));
  rec.top.t = frame_t;
  rec.bottom.t = frame_t;
  rec.annotations = AnnotationTrack({{0.0, 1e9, ActionLabel::Poking}});
  return rec;
}

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("mmhar_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("alignment at exact nominal rates yields one sample per frame") {
  const GenParams p = exact_clock();
  const Recording rec = gen_segment(ActionLabel::Poking, 3.0, Hand::Right, p, 0, GenOptions{false});
  const AlignedImu aligned = align_imu_to_frames(rec);
  CHECK(aligned.values.rows() == 90);
  const double imu_period = 1.0 / p.imu_rate;
  for (std::size_t i = 0; i < aligned.frame_t.size(); ++i) {
    CHECK(std::abs(rec.imu.t[static_cast<std::size_t>(aligned.imu_index[i])] - aligned.frame_t[i]) <=
          0.5 * imu_period + 1e-12);
  }
}

TEST_CASE("alignment picks the exact-match sample and ties go earlier") {
  {
    const Recording rec = tiny_recording({0.025, 0.050, 0.075}, {0.050});
    const AlignedImu a = align_imu_to_frames(rec);
    CHECK(a.imu_index[0] == 1);
  }
  {
    const Recording rec = tiny_recording({0.025, 0.050}, {0.0375});
    const AlignedImu a = align_imu_to_frames(rec);
    CHECK(a.imu_index[0] == 0);  // equidistant -> earlier sample
  }
}

TEST_CASE("alignment gap raises") {
  const Recording rec = tiny_recording({0.0, 0.025, 0.050}, {0.5});
  CHECK_THROWS_AS(align_imu_to_frames(rec), AlignmentGap);
  Recording empty;
  CHECK_THROWS_AS(align_imu_to_frames(empty), Error);
}

TEST_CASE("preprocess crops 1080p-like frames to a square and resizes") {
  ImageU8 img(1080, 1920);
  img.setConstant(10);
  // Marks outside the central 1080x1080 crop must not influence the output.
  img.block(0, 0, 1080, 420).setConstant(255);
  img.block(0, 1500, 1080, 420).setConstant(255);
  const Mat<double> out = preprocess_frame(img, 224);
  REQUIRE(out.rows() == 224);
  REQUIRE(out.cols() == 224);
  CHECK(out.maxCoeff() == Catch::Approx(10.0 / 255.0));
  CHECK(out.minCoeff() == Catch::Approx(10.0 / 255.0));
}

TEST_CASE("preprocess is an exact identity on already-square gray input") {
  ImageU8 img(56, 56);
  Rng rng(3);
  for (int r = 0; r < 56; ++r)
    for (int c = 0; c < 56; ++c) img(r, c) = static_cast<std::uint8_t>(rng.below(256));
  const Mat<double> out = preprocess_frame(img, 56);
  for (int r = 0; r < 56; ++r)
    for (int c = 0; c < 56; ++c) CHECK(out(r, c) == img(r, c) / 255.0);
}

TEST_CASE("preprocess preserves constants and rejects degenerate input") {
  ImageU8 img(33, 47);
  img.setConstant(120);
  const Mat<double> out = preprocess_frame(img, 16);
  CHECK((out.array() - 120.0 / 255.0).abs().maxCoeff() < 1e-12);

  ImageU8 thin(1, 5);
  CHECK_THROWS_AS(preprocess_frame(thin, 16), Error);
}

TEST_CASE("preprocess converts color via luminance weights") {
  ColorImage img;
  img.r = ImageU8::Constant(16, 16, 200);
  img.g = ImageU8::Constant(16, 16, 100);
  img.b = ImageU8::Constant(16, 16, 50);
  const Mat<double> out = preprocess_frame(img, 16);
  const double expect = (0.299 * 200 + 0.587 * 100 + 0.114 * 50) / 255.0;
  CHECK(out(8, 8) == Catch::Approx(expect));
}

TEST_CASE("segmentation tiles and discards the remainder") {
  const GenParams p = exact_clock(5);
  {
    const Recording rec = gen_segment(ActionLabel::Rubbing, 60.0, Hand::Right, p, 0, GenOptions{false});
    CHECK(segment(rec).size() == 20);
  }
  {
    // 89 frames: just under one window.
    const Recording rec = gen_segment(ActionLabel::Rubbing, 89.0 / 30.0, Hand::Right, p, 0, GenOptions{false});
    REQUIRE(rec.top.size() == 89);
    CHECK(segment(rec).empty());
  }
}

TEST_CASE("window labels come from the annotation at the window midpoint") {
  const GenParams p = exact_clock(9);
  const Recording rec = gen_continuous_sequence(
      {ActionLabel::Pinching, ActionLabel::Shaking, ActionLabel::Stroking}, 6.0, 3.0, p, 0,
      Hand::Right, GenOptions{false});
  const auto windows = segment(rec);
  REQUIRE(!windows.empty());
  for (const auto& w : windows) {
    const double mid = w.start_ts + 0.5 * (kWindowLen - 1) / p.camera_rate;
    CHECK(w.label == rec.annotations.label_at(mid));
  }
}

TEST_CASE("stratified split matches fractions globally and per class") {
  std::vector<ActionLabel> labels;
  for (int c = 0; c < kNumClasses; ++c)
    for (int i = 0; i < 20; ++i) labels.push_back(label_from_index(c));
  const SplitIndices s = split_dataset(labels, {0.6, 0.2, 0.2}, 11);
  CHECK(s.train.size() == 180);
  CHECK(s.val.size() == 60);
  CHECK(s.test.size() == 60);

  auto class_counts = [&](const std::vector<int>& idx) {
    std::map<int, int> counts;
    for (int i : idx) counts[index_of(labels[static_cast<std::size_t>(i)])]++;
    return counts;
  };
  for (auto [c, n] : class_counts(s.train)) CHECK(n == 12);
  for (auto [c, n] : class_counts(s.val)) CHECK(n == 4);
  for (auto [c, n] : class_counts(s.test)) CHECK(n == 4);

  // No window in two splits; count conservation.
  std::vector<int> all = s.train;
  all.insert(all.end(), s.val.begin(), s.val.end());
  all.insert(all.end(), s.test.begin(), s.test.end());
  std::sort(all.begin(), all.end());
  CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());
  CHECK(all.size() == labels.size());
}

TEST_CASE("one window per class splits 9/3/3") {
  std::vector<ActionLabel> labels;
  for (int c = 0; c < kNumClasses; ++c) labels.push_back(label_from_index(c));
  const SplitIndices s = split_dataset(labels, {0.6, 0.2, 0.2}, 3);
  CHECK(s.train.size() == 9);
  CHECK(s.val.size() == 3);
  CHECK(s.test.size() == 3);
  // Distinct classes per slot, as far as 15 singletons permit.
  auto distinct = [&](const std::vector<int>& idx) {
    std::set<int> cs;
    for (int i : idx) cs.insert(index_of(labels[static_cast<std::size_t>(i)]));
    return cs.size() == idx.size();
  };
  CHECK(distinct(s.train));
  CHECK(distinct(s.val));
  CHECK(distinct(s.test));
}

TEST_CASE("split is deterministic and validates input") {
  std::vector<ActionLabel> labels(40, ActionLabel::Poking);
  const SplitIndices a = split_dataset(labels, {0.6, 0.2, 0.2}, 77);
  const SplitIndices b = split_dataset(labels, {0.6, 0.2, 0.2}, 77);
  CHECK(a.train == b.train);
  CHECK(a.val == b.val);
  CHECK(a.test == b.test);

  CHECK_THROWS_AS(split_dataset(std::vector<ActionLabel>{}, {0.6, 0.2, 0.2}, 1), Error);
  CHECK_THROWS_AS(split_dataset(labels, {0.5, 0.2, 0.2}, 1), Error);
  CHECK_THROWS_AS(split_dataset(labels, {0.0, 0.5, 0.5}, 1), Error);  // empty train split
}

TEST_CASE("per-split standardization reaches zero mean unit variance") {
  const GenParams p = desk_params(13);
  std::vector<Window> windows;
  for (ActionLabel l : {ActionLabel::Pinching, ActionLabel::Idle, ActionLabel::Shaking}) {
    const Recording rec = gen_segment(l, 6.0, Hand::Right, p);
    for (auto& w : segment(rec)) windows.push_back(std::move(w));
  }
  REQUIRE(windows.size() == 6);
  std::vector<int> split(windows.size());
  std::iota(split.begin(), split.end(), 0);
  const SplitStats stats = compute_image_stats(windows, split, 56);
  CHECK(stats.std > 0.0);

  // Post-hoc mean/std of the standardized view.
  double sum = 0.0, sumsq = 0.0;
  std::int64_t count = 0;
  for (int wi : split) {
    const Window& w = windows[static_cast<std::size_t>(wi)];
    for (int i = 0; i < w.length(); ++i)
      for (const ImageU8* img : {&w.top_frame(i), &w.bottom_frame(i)}) {
        const Mat<double> z = standardize_image(preprocess_frame(*img, 56), stats);
        sum += z.sum();
        sumsq += z.array().square().sum();
        count += z.size();
      }
  }
  const double mu = sum / count;
  const double sd = std::sqrt(sumsq / count - mu * mu);
  CHECK(std::abs(mu) <= 1e-4);
  CHECK(std::abs(sd - 1.0) <= 1e-4);
}

TEST_CASE("constant frames raise DegenerateSplit") {
  Window w;
  w.imu = MatD::Zero(4, kFullGloveWidth);
  auto store = std::make_shared<FrameStore>();
  store->top.assign(4, ImageU8::Constant(16, 16, 55));
  store->bottom.assign(4, ImageU8::Constant(16, 16, 55));
  w.frames = store;
  w.top_index = {0, 1, 2, 3};
  w.bottom_index = {0, 1, 2, 3};
  std::vector<Window> windows{w};
  CHECK_THROWS_AS(compute_image_stats(windows, {0}, 16), DegenerateSplit);
}

TEST_CASE("train-only statistics applied to another split leave its mean off zero") {
  const GenParams p = desk_params(15);
  const Recording bright = gen_segment(ActionLabel::Squeezing, 3.0, Hand::Right, p);
  const Recording quiet = gen_segment(ActionLabel::Idle, 3.0, Hand::Right, p);
  auto wa = segment(bright);
  auto wb = segment(quiet);
  std::vector<Window> windows;
  windows.push_back(wa.front());
  windows.push_back(wb.front());
  const SplitStats train_stats = compute_image_stats(windows, {0}, 56);
  double sum = 0.0;
  std::int64_t count = 0;
  const Window& w = windows[1];
  for (int i = 0; i < w.length(); ++i) {
    const Mat<double> z = standardize_image(preprocess_frame(w.top_frame(i), 56), train_stats);
    sum += z.sum();
    count += z.size();
  }
  CHECK(std::abs(sum / count) > 1e-3);
}

TEST_CASE("imu normalization hits full scale and clamps") {
  MatD values = MatD::Zero(1, kFullGloveWidth);
  values(0, 0) = 16.0;     // accel full scale
  values(0, 3) = -3000.0;  // gyro beyond range
  const MatD out = normalize_imu(values);
  CHECK(out(0, 0) == 1.0);
  CHECK(out(0, 3) == -1.0);
  CHECK(out(0, 10) == 0.0);
  CHECK(out.cwiseAbs().maxCoeff() <= 1.0);
}

TEST_CASE("masking commutes with window materialization bit-exactly") {
  const GenParams p = desk_params(19);
  const Recording rec = gen_segment(ActionLabel::Massaging, 3.0, Hand::Left, p, 0, GenOptions{false});
  const auto windows = segment(rec);
  REQUIRE(!windows.empty());
  const Window& w = windows.front();
  const auto full = window_imu_input<double>(w, sensor_config("8FG"));
  for (const auto& cfg : sensor_configs()) {
    const auto masked = window_imu_input<double>(w, cfg);
    const auto idx = channel_indices(cfg);
    REQUIRE(masked.cols() == static_cast<Eigen::Index>(idx.size()));
    for (Eigen::Index r = 0; r < masked.rows(); ++r)
      for (std::size_t k = 0; k < idx.size(); ++k)
        CHECK(masked(r, static_cast<Eigen::Index>(k)) == full(r, idx[k]));
  }

  // Pre-masked windows pass through; wrong widths are a modality mismatch.
  Window pre = w;
  pre.imu = select_channels(w.imu, channel_indices(sensor_config("3CP")));
  const auto direct = window_imu_input<double>(pre, sensor_config("3CP"));
  const auto via_full = window_imu_input<double>(w, sensor_config("3CP"));
  CHECK((direct.array() == via_full.array()).all());
  CHECK_THROWS_AS(window_imu_input<double>(pre, sensor_config("2TI")), ModalityMismatch);
}

TEST_CASE("windowized container round-trips") {
  const GenParams p = desk_params(23);
  const Recording rec = gen_segment(ActionLabel::Trembling, 6.0, Hand::Right, p);
  const auto windows = segment(rec);
  REQUIRE(windows.size() == 2);
  const auto dir = temp_dir("windows");
  save_windows(dir, windows);
  const auto loaded = load_windows(dir);
  REQUIRE(loaded.size() == windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    CHECK(loaded[i].label == windows[i].label);
    CHECK(loaded[i].recording_id == windows[i].recording_id);
    CHECK((loaded[i].imu.array() == windows[i].imu.array()).all());
    for (int f = 0; f < windows[i].length(); ++f) {
      CHECK((loaded[i].top_frame(f).array() == windows[i].top_frame(f).array()).all());
      CHECK((loaded[i].bottom_frame(f).array() == windows[i].bottom_frame(f).array()).all());
    }
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("recording save/load round-trips and reruns are byte-identical") {
  const GenParams p = desk_params(29);
  const Recording rec = gen_segment(ActionLabel::Patting, 2.0, Hand::Left, p, 1);
  const auto dir_a = temp_dir("rec_a");
  const auto dir_b = temp_dir("rec_b");
  save_recording(dir_a / "r", rec);
  save_recording(dir_b / "r", gen_segment(ActionLabel::Patting, 2.0, Hand::Left, p, 1));

  const Recording back = load_recording(dir_a / "r");
  CHECK(back.meta.id == rec.meta.id);
  CHECK(back.meta.hand == Hand::Left);
  CHECK(back.imu.t == rec.imu.t);
  CHECK((back.imu.values.array() == rec.imu.values.array()).all());
  REQUIRE(back.top.frames.size() == rec.top.frames.size());
  for (std::size_t i = 0; i < rec.top.frames.size(); ++i)
    CHECK((back.top.frames[i].array() == rec.top.frames[i].array()).all());
  REQUIRE(back.annotations.spans().size() == rec.annotations.spans().size());

  // Byte-level determinism across reruns.
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir_a)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(entry.path(), dir_a);
    std::ifstream fa(entry.path(), std::ios::binary);
    std::ifstream fb(dir_b / rel, std::ios::binary);
    REQUIRE(fb.good());
    const std::string ca((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    const std::string cb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(ca == cb);
  }
  std::filesystem::remove_all(dir_a);
  std::filesystem::remove_all(dir_b);
}
