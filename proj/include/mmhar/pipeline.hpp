// Recording -> model-ready windows: timestamp alignment (nearest sample, ties
// to the earlier one), non-overlapping 90-frame segmentation labeled at the
// window midpoint, stratified 60/20/20 splitting, per-split image
// standardization and full-scale IMU normalization.
#pragma once

#include "mmhar/core.hpp"
#include "mmhar/image.hpp"
#include "mmhar/recording.hpp"
#include "mmhar/rng.hpp"
#include "mmhar/synthgen.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>
#include <vector>

namespace mmhar {

constexpr int kWindowLen = 90;  // 3 s at 30 fps

namespace detail {

// Index of the time in `ts` nearest to q; equidistant ties resolve to the
// earlier sample.
inline int nearest_index(const std::vector<double>& ts, double q) {
  const auto it = std::lower_bound(ts.begin(), ts.end(), q);
  if (it == ts.begin()) return 0;
  if (it == ts.end()) return static_cast<int>(ts.size()) - 1;
  const int hi = static_cast<int>(it - ts.begin());
  const int lo = hi - 1;
  return (q - ts[lo] <= ts[hi] - q) ? lo : hi;
}

inline double mean_period(const std::vector<double>& ts) {
  if (ts.size() < 2) return 0.0;
  return (ts.back() - ts.front()) / static_cast<double>(ts.size() - 1);
}

}  // namespace detail

struct AlignedImu {
  MatD values;                  // one row per top frame
  std::vector<double> frame_t;  // the frame timestamps rows are aligned to
  std::vector<int> imu_index;   // source IMU sample per row
};

inline AlignedImu align_imu_to_frames(const Recording& rec) {
  if (rec.imu.size() == 0 || rec.top.t.empty())
    throw Error("alignment requires non-empty IMU and top-frame streams");
  const double period = std::max(detail::mean_period(rec.imu.t), 1e-9);
  AlignedImu out;
  out.frame_t = rec.top.t;
  out.imu_index.resize(rec.top.t.size());
  out.values.resize(static_cast<Eigen::Index>(rec.top.t.size()), rec.imu.values.cols());
  for (std::size_t i = 0; i < rec.top.t.size(); ++i) {
    const int j = detail::nearest_index(rec.imu.t, rec.top.t[i]);
    if (std::abs(rec.imu.t[static_cast<std::size_t>(j)] - rec.top.t[i]) > period)
      throw AlignmentGap("frame at t=" + std::to_string(rec.top.t[i]) +
                         " is more than one IMU period from every IMU sample");
    out.imu_index[i] = j;
    out.values.row(static_cast<Eigen::Index>(i)) = rec.imu.values.row(j);
  }
  return out;
}

struct FrameStore {
  std::vector<ImageU8> top;
  std::vector<ImageU8> bottom;
};

struct Window {
  MatD imu;  // window_len x 72 raw sensor units (or a pre-masked subset)
  std::shared_ptr<const FrameStore> frames;  // null for metadata-only windows
  std::vector<int> top_index;
  std::vector<int> bottom_index;
  ActionLabel label = ActionLabel::Idle;
  std::string recording_id;
  int start_frame = 0;
  double start_ts = 0.0;

  int length() const { return static_cast<int>(top_index.size()); }
  bool has_frames() const { return frames != nullptr; }
  const ImageU8& top_frame(int i) const { return frames->top[static_cast<std::size_t>(top_index[static_cast<std::size_t>(i)])]; }
  const ImageU8& bottom_frame(int i) const { return frames->bottom[static_cast<std::size_t>(bottom_index[static_cast<std::size_t>(i)])]; }
};

// Consecutive non-overlapping windows starting at frame 0; the trailing
// remainder is discarded. Label = annotation covering the window midpoint.
inline std::vector<Window> segment(const Recording& rec, int window_len = kWindowLen) {
  if (window_len < 1) throw Error("window_len must be >= 1");
  std::vector<Window> out;
  const int n_frames = static_cast<int>(rec.top.t.size());
  if (n_frames < window_len) return out;

  const AlignedImu aligned = align_imu_to_frames(rec);

  // Bottom frames are paired to top ticks with the same nearest-sample rule.
  std::vector<int> bottom_of_top(static_cast<std::size_t>(n_frames));
  if (!rec.bottom.t.empty()) {
    const double cam_period = std::max(detail::mean_period(rec.top.t), 1e-9);
    for (int i = 0; i < n_frames; ++i) {
      const int j = detail::nearest_index(rec.bottom.t, rec.top.t[static_cast<std::size_t>(i)]);
      if (std::abs(rec.bottom.t[static_cast<std::size_t>(j)] - rec.top.t[static_cast<std::size_t>(i)]) > cam_period)
        throw AlignmentGap("bottom camera gap near t=" + std::to_string(rec.top.t[static_cast<std::size_t>(i)]));
      bottom_of_top[static_cast<std::size_t>(i)] = j;
    }
  }

  std::shared_ptr<const FrameStore> store;
  if (!rec.top.frames.empty()) {
    auto s = std::make_shared<FrameStore>();
    s->top = rec.top.frames;
    s->bottom = rec.bottom.frames;
    store = std::move(s);
  }

  for (int start = 0; start + window_len <= n_frames; start += window_len) {
    Window w;
    w.imu = aligned.values.middleRows(start, window_len);
    w.frames = store;
    w.top_index.resize(static_cast<std::size_t>(window_len));
    w.bottom_index.resize(static_cast<std::size_t>(window_len));
    for (int i = 0; i < window_len; ++i) {
      w.top_index[static_cast<std::size_t>(i)] = start + i;
      w.bottom_index[static_cast<std::size_t>(i)] = rec.bottom.t.empty() ? 0 : bottom_of_top[static_cast<std::size_t>(start + i)];
    }
    const double mid = 0.5 * (rec.top.t[static_cast<std::size_t>(start)] +
                              rec.top.t[static_cast<std::size_t>(start + window_len - 1)]);
    w.label = rec.annotations.label_at(mid);
    w.recording_id = rec.meta.id;
    w.start_frame = start;
    w.start_ts = rec.top.t[static_cast<std::size_t>(start)];
    out.push_back(std::move(w));
  }
  return out;
}

struct SplitIndices {
  std::vector<int> train, val, test;
};

// Stratified seeded split. Global split sizes follow the fractions by largest
// remainder; per-class counts deviate from proportionality by at most one.
inline SplitIndices split_dataset(const std::vector<ActionLabel>& labels,
                                  const std::array<double, 3>& fractions, std::uint64_t seed) {
  if (labels.empty()) throw Error("split_dataset: no windows");
  const double fsum = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(fsum - 1.0) > 1e-9) throw Error("split fractions must sum to 1");
  for (double f : fractions)
    if (f < 0.0) throw Error("split fractions must be non-negative");

  const int n = static_cast<int>(labels.size());

  std::array<std::vector<int>, kNumClasses> members;
  for (int i = 0; i < n; ++i) members[static_cast<std::size_t>(index_of(labels[static_cast<std::size_t>(i)]))].push_back(i);
  int classes_present = 0;
  for (const auto& m : members) classes_present += m.empty() ? 0 : 1;
  if (n < classes_present) throw Error("fewer windows than classes");
  if (static_cast<int>(std::floor(fractions[0] * n + 1e-9)) < 1 && fractions[0] * n < 0.5)
    throw Error("train split would be empty");

  // Global targets by largest remainder.
  std::array<int, 3> target{};
  {
    std::array<double, 3> exact{};
    int assigned = 0;
    for (int s = 0; s < 3; ++s) {
      exact[static_cast<std::size_t>(s)] = fractions[static_cast<std::size_t>(s)] * n;
      target[static_cast<std::size_t>(s)] = static_cast<int>(std::floor(exact[static_cast<std::size_t>(s)] + 1e-9));
      assigned += target[static_cast<std::size_t>(s)];
    }
    while (assigned < n) {
      int best = 0;
      double best_rem = -1.0;
      for (int s = 0; s < 3; ++s) {
        const double rem = exact[static_cast<std::size_t>(s)] - target[static_cast<std::size_t>(s)];
        if (rem > best_rem + 1e-12) {
          best_rem = rem;
          best = s;
        }
      }
      ++target[static_cast<std::size_t>(best)];
      ++assigned;
    }
  }

  std::array<int, 3> assigned{};
  std::array<std::array<int, 3>, kNumClasses> quota{};
  // Per-class floors, then leftovers to the feasible split with the largest
  // per-class remainder.
  for (int c = 0; c < kNumClasses; ++c) {
    const int nc = static_cast<int>(members[static_cast<std::size_t>(c)].size());
    if (nc == 0) continue;
    std::array<double, 3> rem{};
    int used = 0;
    for (int s = 0; s < 3; ++s) {
      const double exact = fractions[static_cast<std::size_t>(s)] * nc;
      quota[static_cast<std::size_t>(c)][static_cast<std::size_t>(s)] = static_cast<int>(std::floor(exact + 1e-9));
      rem[static_cast<std::size_t>(s)] = exact - quota[static_cast<std::size_t>(c)][static_cast<std::size_t>(s)];
      used += quota[static_cast<std::size_t>(c)][static_cast<std::size_t>(s)];
      assigned[static_cast<std::size_t>(s)] += quota[static_cast<std::size_t>(c)][static_cast<std::size_t>(s)];
    }
    for (int extra = used; extra < nc; ++extra) {
      int best = -1;
      for (int s = 0; s < 3; ++s) {
        if (assigned[static_cast<std::size_t>(s)] >= target[static_cast<std::size_t>(s)]) continue;
        if (best < 0 || rem[static_cast<std::size_t>(s)] > rem[static_cast<std::size_t>(best)] + 1e-12) best = s;
      }
      if (best < 0) throw Error("split quota bookkeeping failed");
      ++quota[static_cast<std::size_t>(c)][static_cast<std::size_t>(best)];
      ++assigned[static_cast<std::size_t>(best)];
      rem[static_cast<std::size_t>(best)] = -1.0;
    }
  }

  SplitIndices out;
  for (int c = 0; c < kNumClasses; ++c) {
    auto& m = members[static_cast<std::size_t>(c)];
    if (m.empty()) continue;
    Rng rng(mix_seed(seed, hash_str("split-class"), static_cast<std::uint64_t>(c)));
    rng.shuffle(m);
    std::size_t pos = 0;
    for (int s = 0; s < 3; ++s) {
      auto& dst = s == 0 ? out.train : s == 1 ? out.val : out.test;
      for (int k = 0; k < quota[static_cast<std::size_t>(c)][static_cast<std::size_t>(s)]; ++k)
        dst.push_back(m[pos++]);
    }
  }
  for (int s = 0; s < 3; ++s) {
    auto& dst = s == 0 ? out.train : s == 1 ? out.val : out.test;
    Rng rng(mix_seed(seed, hash_str("split-order"), static_cast<std::uint64_t>(s)));
    rng.shuffle(dst);
  }
  return out;
}

inline SplitIndices split_dataset(const std::vector<Window>& windows,
                                  const std::array<double, 3>& fractions, std::uint64_t seed) {
  std::vector<ActionLabel> labels;
  labels.reserve(windows.size());
  for (const auto& w : windows) labels.push_back(w.label);
  return split_dataset(labels, fractions, seed);
}

enum class StatsSource { PerSplit, TrainOnly };

struct SplitStats {
  double mean = 0.0;
  double std = 1.0;
  int image_size = 0;  // the resolution the stats were computed at
};

// Streaming mean/std over the preprocessed pixels of both cameras of the
// given windows. The standardized view of a window is
// (preprocess_frame(...) - mean) / std.
inline SplitStats compute_image_stats(const std::vector<Window>& windows,
                                      const std::vector<int>& split, int target_size) {
  if (split.empty()) throw Error("standardize: empty split");
  double sum = 0.0, sumsq = 0.0;
  std::int64_t count = 0;
  for (int wi : split) {
    const Window& w = windows[static_cast<std::size_t>(wi)];
    if (!w.has_frames()) throw Error("standardize: window has no frames");
    for (int i = 0; i < w.length(); ++i) {
      for (const ImageU8* img : {&w.top_frame(i), &w.bottom_frame(i)}) {
        const Mat<double> f = preprocess_frame(*img, target_size);
        sum += f.sum();
        sumsq += f.array().square().sum();
        count += f.size();
      }
    }
  }
  SplitStats stats;
  stats.image_size = target_size;
  stats.mean = sum / static_cast<double>(count);
  const double var = std::max(0.0, sumsq / static_cast<double>(count) - stats.mean * stats.mean);
  stats.std = std::sqrt(var);
  if (stats.std < 1e-8) throw DegenerateSplit("split pixel std below 1e-8");
  return stats;
}

inline Mat<double> standardize_image(const Mat<double>& img, const SplitStats& stats) {
  return (img.array() - stats.mean) / stats.std;
}

// x / full_scale, clamped to [-1, 1]. Columns follow the canonical layout.
inline MatD normalize_imu(const MatD& values, const ImuRanges& ranges = {}) {
  if (!(ranges.accel > 0.0 && ranges.gyro > 0.0 && ranges.mag > 0.0))
    throw Error("imu ranges must be positive");
  MatD out(values.rows(), values.cols());
  for (Eigen::Index c = 0; c < values.cols(); ++c) {
    const double fs = ranges.full_scale(static_cast<int>(c));
    out.col(c) = (values.col(c) / fs).cwiseMax(-1.0).cwiseMin(1.0);
  }
  return out;
}

inline MatD select_channels(const MatD& m, const std::vector<int>& idx) {
  MatD out(m.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = m.col(idx[k]);
  return out;
}

// Normalized, configuration-masked IMU input. Accepts full-glove windows
// (masked here) or pre-masked windows whose width already matches.
template <class S>
Mat<S> window_imu_input(const Window& w, const SensorConfig& config, const ImuRanges& ranges = {}) {
  const int want = feature_width(config);
  MatD raw;
  if (w.imu.cols() == kFullGloveWidth) {
    raw = select_channels(w.imu, channel_indices(config));
  } else if (w.imu.cols() == want) {
    raw = w.imu;
  } else {
    throw ModalityMismatch("window has " + std::to_string(w.imu.cols()) + " IMU channels, config " +
                           config.name + " needs " + std::to_string(want));
  }
  return normalize_imu(raw, ranges).cast<S>();
}

// Frames of one camera as a (length x target^2) matrix of standardized pixels,
// rows in frame order, pixels in row-major scan order.
template <class S>
Mat<S> window_frames_input(const Window& w, bool bottom, const SplitStats& stats) {
  if (!w.has_frames()) throw ModalityMismatch("window carries no frames");
  const int target = stats.image_size;
  Mat<S> out(w.length(), target * target);
  for (int i = 0; i < w.length(); ++i) {
    const ImageU8& src = bottom ? w.bottom_frame(i) : w.top_frame(i);
    const Mat<double> std_img = standardize_image(preprocess_frame(src, target), stats);
    for (int r = 0; r < target; ++r)
      for (int c = 0; c < target; ++c)
        out(i, r * target + c) = static_cast<S>(std_img(r, c));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Windowized dataset container: header.json + index.csv + tensors.bin holding
// fixed-size records (imu doubles, then top and bottom uint8 frames).

inline void save_windows(const std::filesystem::path& dir, const std::vector<Window>& windows) {
  if (windows.empty()) throw Error("save_windows: nothing to save");
  const int len = windows.front().length();
  const Eigen::Index imu_cols = windows.front().imu.cols();
  int image_size = 0;
  for (const auto& w : windows) {
    if (w.length() != len || w.imu.cols() != imu_cols) throw ShapeMismatch("inconsistent window shapes");
    if (!w.has_frames()) throw Error("save_windows: metadata-only window");
    const int s = static_cast<int>(w.top_frame(0).rows());
    if (image_size == 0) image_size = s;
    if (s != image_size) throw ShapeMismatch("inconsistent frame sizes");
  }
  std::filesystem::create_directories(dir);

  nlohmann::json header;
  header["count"] = windows.size();
  header["window_len"] = len;
  header["imu_cols"] = imu_cols;
  header["image_size"] = image_size;
  {
    std::ofstream out(dir / "header.json");
    out << header.dump(2) << "\n";
  }
  {
    std::ofstream idx(dir / "index.csv");
    idx << "window_id,recording_id,start_frame,label\n";
    for (std::size_t i = 0; i < windows.size(); ++i)
      idx << i << "," << windows[i].recording_id << "," << windows[i].start_frame << ","
          << label_name(windows[i].label) << "\n";
  }
  std::ofstream bin(dir / "tensors.bin", std::ios::binary);
  for (const auto& w : windows) {
    for (int i = 0; i < len; ++i)
      for (Eigen::Index c = 0; c < imu_cols; ++c) {
        const double v = w.imu(i, c);
        bin.write(reinterpret_cast<const char*>(&v), sizeof(double));
      }
    for (int i = 0; i < len; ++i)
      bin.write(reinterpret_cast<const char*>(w.top_frame(i).data()),
                static_cast<std::streamsize>(w.top_frame(i).size()));
    for (int i = 0; i < len; ++i)
      bin.write(reinterpret_cast<const char*>(w.bottom_frame(i).data()),
                static_cast<std::streamsize>(w.bottom_frame(i).size()));
  }
  if (!bin) throw IoError("short write: " + (dir / "tensors.bin").string());
}

inline std::vector<Window> load_windows(const std::filesystem::path& dir) {
  nlohmann::json header;
  {
    std::ifstream in(dir / "header.json");
    if (!in) throw IoError("cannot read " + (dir / "header.json").string());
    header = nlohmann::json::parse(in);
  }
  const std::size_t count = header.at("count").get<std::size_t>();
  const int len = header.at("window_len").get<int>();
  const Eigen::Index imu_cols = header.at("imu_cols").get<Eigen::Index>();
  const int s = header.at("image_size").get<int>();

  struct IndexRow {
    std::string rec_id;
    int start_frame;
    ActionLabel label;
  };
  std::vector<IndexRow> rows;
  {
    std::ifstream idx(dir / "index.csv");
    if (!idx) throw IoError("cannot read " + (dir / "index.csv").string());
    std::string line;
    std::getline(idx, line);
    while (std::getline(idx, line)) {
      if (line.empty()) continue;
      const auto f = detail::split_csv_line(line);
      if (f.size() != 4) throw IoError("malformed index.csv line: " + line);
      rows.push_back({f[1], std::stoi(f[2]), label_from_name(f[3])});
    }
  }
  if (rows.size() != count) throw IoError("index.csv row count != header count");

  std::ifstream bin(dir / "tensors.bin", std::ios::binary);
  if (!bin) throw IoError("cannot read " + (dir / "tensors.bin").string());
  std::vector<Window> windows;
  windows.reserve(count);
  for (std::size_t wi = 0; wi < count; ++wi) {
    Window w;
    w.imu.resize(len, imu_cols);
    for (int i = 0; i < len; ++i)
      for (Eigen::Index c = 0; c < imu_cols; ++c) {
        double v = 0.0;
        bin.read(reinterpret_cast<char*>(&v), sizeof(double));
        w.imu(i, c) = v;
      }
    auto store = std::make_shared<FrameStore>();
    store->top.resize(static_cast<std::size_t>(len), ImageU8(s, s));
    store->bottom.resize(static_cast<std::size_t>(len), ImageU8(s, s));
    for (int i = 0; i < len; ++i)
      bin.read(reinterpret_cast<char*>(store->top[static_cast<std::size_t>(i)].data()),
               static_cast<std::streamsize>(s) * s);
    for (int i = 0; i < len; ++i)
      bin.read(reinterpret_cast<char*>(store->bottom[static_cast<std::size_t>(i)].data()),
               static_cast<std::streamsize>(s) * s);
    if (!bin) throw IoError("tensors.bin truncated");
    w.frames = store;
    w.top_index.resize(static_cast<std::size_t>(len));
    w.bottom_index.resize(static_cast<std::size_t>(len));
    std::iota(w.top_index.begin(), w.top_index.end(), 0);
    std::iota(w.bottom_index.begin(), w.bottom_index.end(), 0);
    w.recording_id = rows[wi].rec_id;
    w.start_frame = rows[wi].start_frame;
    w.label = rows[wi].label;
    windows.push_back(std::move(w));
  }
  return windows;
}

}  // namespace mmhar
