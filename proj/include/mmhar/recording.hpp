// Raw recordings: timestamped IMU and dual camera streams plus an interval
// annotation track, and the dataset-on-disk layout (one directory per
// recording: imu.csv, frames_top/, frames_bottom/, annotations.csv,
// meta.json). Numeric text is written with %.17g so doubles round-trip
// exactly and reruns at a fixed seed produce identical bytes.
#pragma once

#include "mmhar/core.hpp"
#include "mmhar/image.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace mmhar {

enum class Hand { Left, Right };

inline std::string_view hand_name(Hand h) { return h == Hand::Left ? "L" : "R"; }

inline Hand hand_from_name(std::string_view s) {
  if (s == "L") return Hand::Left;
  if (s == "R") return Hand::Right;
  throw Error("unknown hand: " + std::string(s));
}

struct AnnotationSpan {
  double start_s = 0.0;
  double end_s = 0.0;
  ActionLabel label = ActionLabel::Idle;
};

// Ordered, non-overlapping labeled intervals; gaps read as Idle.
class AnnotationTrack {
 public:
  AnnotationTrack() = default;
  explicit AnnotationTrack(std::vector<AnnotationSpan> spans) : spans_(std::move(spans)) {
    for (std::size_t i = 0; i < spans_.size(); ++i) {
      if (spans_[i].end_s <= spans_[i].start_s) throw Error("annotation interval with end <= start");
      if (i > 0 && spans_[i].start_s < spans_[i - 1].end_s)
        throw Error("annotation intervals overlap or are unsorted");
    }
  }

  const std::vector<AnnotationSpan>& spans() const { return spans_; }
  bool empty() const { return spans_.empty(); }
  double end_s() const { return spans_.empty() ? 0.0 : spans_.back().end_s; }

  ActionLabel label_at(double t) const {
    for (const auto& s : spans_) {
      if (t < s.start_s) break;
      if (t < s.end_s) return s.label;
    }
    return ActionLabel::Idle;
  }

 private:
  std::vector<AnnotationSpan> spans_;
};

struct ImuStream {
  std::vector<double> t;
  MatD values;  // N x 72, canonical channel order, sensor units

  int size() const { return static_cast<int>(t.size()); }
};

struct FrameStream {
  std::vector<double> t;
  std::vector<ImageU8> frames;

  int size() const { return static_cast<int>(t.size()); }
};

struct RecordingMeta {
  std::string id;
  int participant = 0;
  Hand hand = Hand::Right;
  std::string source = "synthetic";
  double imu_rate = 40.0;
  double camera_rate = 30.0;
};

struct Recording {
  RecordingMeta meta;
  ImuStream imu;
  FrameStream top;
  FrameStream bottom;
  AnnotationTrack annotations;

  void validate() const {
    auto check_increasing = [](const std::vector<double>& t, const char* what) {
      for (std::size_t i = 1; i < t.size(); ++i)
        if (t[i] <= t[i - 1]) throw Error(std::string("timestamps not strictly increasing in ") + what);
    };
    check_increasing(imu.t, "imu");
    check_increasing(top.t, "top frames");
    check_increasing(bottom.t, "bottom frames");
    if (imu.values.rows() != imu.size()) throw ShapeMismatch("imu rows != imu timestamps");
    if (imu.size() > 0 && imu.values.cols() != kFullGloveWidth)
      throw ShapeMismatch("imu stream must carry all 72 channels");
    if (!imu.values.allFinite()) throw Error("imu values must be finite");
  }
};

inline const std::array<std::string_view, 3>& channel_kind_names() {
  static const std::array<std::string_view, 3> kinds = {"acc", "gyr", "mag"};
  return kinds;
}

inline std::string channel_name(int column) {
  const int sensor = column / kChannelsPerSensor;
  const int within = column % kChannelsPerSensor;
  const char axis = "xyz"[within % 3];
  std::string name(1, static_cast<char>('A' + sensor));
  name += '_';
  name += channel_kind_names()[within / 3];
  name += '_';
  name += axis;
  return name;
}

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  std::stringstream ss(line);
  while (std::getline(ss, cur, ',')) fields.push_back(cur);
  return fields;
}

inline std::string frame_file_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06d.pgm", index);
  return buf;
}

inline void save_frame_stream(const std::filesystem::path& dir, const FrameStream& s) {
  std::filesystem::create_directories(dir);
  std::ofstream ts(dir / "timestamps.csv");
  if (!ts) throw IoError("cannot write " + (dir / "timestamps.csv").string());
  ts << "index,timestamp_s\n";
  for (int i = 0; i < s.size(); ++i) {
    pgm_write(dir / frame_file_name(i), s.frames[i]);
    ts << i << "," << fmt_double(s.t[i]) << "\n";
  }
}

inline FrameStream load_frame_stream(const std::filesystem::path& dir) {
  FrameStream s;
  std::ifstream ts(dir / "timestamps.csv");
  if (!ts) throw IoError("cannot read " + (dir / "timestamps.csv").string());
  std::string line;
  std::getline(ts, line);  // header
  while (std::getline(ts, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 2) throw IoError("malformed timestamps.csv line: " + line);
    const int idx = std::stoi(fields[0]);
    s.t.push_back(std::stod(fields[1]));
    s.frames.push_back(pgm_read(dir / frame_file_name(idx)));
  }
  return s;
}

}  // namespace detail

inline void save_recording(const std::filesystem::path& dir, const Recording& rec) {
  rec.validate();
  if (rec.top.frames.size() != rec.top.t.size() || rec.bottom.frames.size() != rec.bottom.t.size())
    throw IoError("cannot persist a recording whose frame pixels were skipped");
  std::filesystem::create_directories(dir);

  {
    std::ofstream out(dir / "imu.csv");
    if (!out) throw IoError("cannot write " + (dir / "imu.csv").string());
    out << "timestamp";
    for (int c = 0; c < kFullGloveWidth; ++c) out << "," << channel_name(c);
    out << "\n";
    for (int i = 0; i < rec.imu.size(); ++i) {
      out << detail::fmt_double(rec.imu.t[i]);
      for (int c = 0; c < kFullGloveWidth; ++c) out << "," << detail::fmt_double(rec.imu.values(i, c));
      out << "\n";
    }
  }

  detail::save_frame_stream(dir / "frames_top", rec.top);
  detail::save_frame_stream(dir / "frames_bottom", rec.bottom);

  {
    std::ofstream out(dir / "annotations.csv");
    out << "start_s,end_s,label\n";
    for (const auto& s : rec.annotations.spans())
      out << detail::fmt_double(s.start_s) << "," << detail::fmt_double(s.end_s) << ","
          << label_name(s.label) << "\n";
  }

  {
    nlohmann::json meta;
    meta["id"] = rec.meta.id;
    meta["participant"] = rec.meta.participant;
    meta["hand"] = std::string(hand_name(rec.meta.hand));
    meta["source"] = rec.meta.source;
    meta["imu_rate"] = rec.meta.imu_rate;
    meta["camera_rate"] = rec.meta.camera_rate;
    std::ofstream out(dir / "meta.json");
    out << meta.dump(2) << "\n";
  }
}

inline Recording load_recording(const std::filesystem::path& dir) {
  Recording rec;

  {
    std::ifstream in(dir / "meta.json");
    if (!in) throw IoError("cannot read " + (dir / "meta.json").string());
    nlohmann::json meta = nlohmann::json::parse(in);
    rec.meta.id = meta.at("id").get<std::string>();
    rec.meta.participant = meta.at("participant").get<int>();
    rec.meta.hand = hand_from_name(meta.at("hand").get<std::string>());
    rec.meta.source = meta.at("source").get<std::string>();
    rec.meta.imu_rate = meta.at("imu_rate").get<double>();
    rec.meta.camera_rate = meta.at("camera_rate").get<double>();
  }

  {
    std::ifstream in(dir / "imu.csv");
    if (!in) throw IoError("cannot read " + (dir / "imu.csv").string());
    std::string line;
    std::getline(in, line);  // header
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto fields = detail::split_csv_line(line);
      if (fields.size() != static_cast<std::size_t>(kFullGloveWidth + 1))
        throw IoError("malformed imu.csv line: " + line);
      std::vector<double> row(fields.size());
      for (std::size_t i = 0; i < fields.size(); ++i) row[i] = std::stod(fields[i]);
      rows.push_back(std::move(row));
    }
    rec.imu.t.resize(rows.size());
    rec.imu.values.resize(static_cast<Eigen::Index>(rows.size()), kFullGloveWidth);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      rec.imu.t[i] = rows[i][0];
      for (int c = 0; c < kFullGloveWidth; ++c) rec.imu.values(static_cast<Eigen::Index>(i), c) = rows[i][c + 1];
    }
  }

  rec.top = detail::load_frame_stream(dir / "frames_top");
  rec.bottom = detail::load_frame_stream(dir / "frames_bottom");

  {
    std::ifstream in(dir / "annotations.csv");
    if (!in) throw IoError("cannot read " + (dir / "annotations.csv").string());
    std::string line;
    std::getline(in, line);
    std::vector<AnnotationSpan> spans;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto fields = detail::split_csv_line(line);
      if (fields.size() != 3) throw IoError("malformed annotations.csv line: " + line);
      spans.push_back({std::stod(fields[0]), std::stod(fields[1]), label_from_name(fields[2])});
    }
    rec.annotations = AnnotationTrack(std::move(spans));
  }

  rec.validate();
  return rec;
}

}  // namespace mmhar
