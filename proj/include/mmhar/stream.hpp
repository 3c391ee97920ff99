// Online classification over continuous streams: per-modality ring buffers, a
// 90-sample moving window assembled causally at each camera frame tick, and
// frame-level accuracy against interval annotations. Window assembly and
// preprocessing reuse the offline pipeline code paths, so a pre-segmented
// window pushed through the stream yields bit-identical logits.
#pragma once

#include "mmhar/harness.hpp"

#include <chrono>
#include <deque>
#include <fstream>
#include <utility>
#include <vector>

namespace mmhar {

struct PredictionTrack {
  std::vector<std::pair<double, ActionLabel>> entries;  // strictly increasing timestamps

  void to_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    out << "timestamp_s,label\n";
    for (const auto& [t, l] : entries) out << t << "," << label_name(l) << "\n";
  }
};

// Fraction of prediction timestamps whose label matches the annotation at
// that timestamp (annotation gaps read as Idle).
inline double frame_accuracy(const PredictionTrack& predictions, const AnnotationTrack& truth) {
  if (predictions.entries.empty()) throw EmptyPredictions("no predictions to score");
  // Trailing frames may overshoot the last interval by jitter; allow a small
  // margin but reject clearly out-of-timeline tracks.
  const double end = truth.end_s() + 1.0;
  std::int64_t hits = 0;
  for (const auto& [t, label] : predictions.entries) {
    if (t < 0.0 || t > end) throw Error("prediction timestamp outside the annotated timeline");
    hits += truth.label_at(t) == label ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(predictions.entries.size());
}

template <class S>
class OnlineClassifier {
 public:
  explicit OnlineClassifier(const Checkpoint& ck, int capacity = 180)
      : ck_(ck), model_(ck.template instantiate<S>()), capacity_(capacity) {
    if (capacity_ < kWindowLen) throw ConfigError("buffer capacity below the window length");
  }

  const InputModality& modality() const { return model_->modality(); }

  void push_imu(double t, const Eigen::RowVectorXd& values) {
    if (values.cols() != kFullGloveWidth) throw ShapeMismatch("imu sample must carry 72 channels");
    push_check(imu_last_, t, "imu");
    imu_.push_back({t, values});
    if (static_cast<int>(imu_.size()) > capacity_) imu_.pop_front();
  }

  void push_top(double t, ImageU8 frame) {
    push_check(top_last_, t, "top");
    top_.push_back({t, std::move(frame)});
    if (static_cast<int>(top_.size()) > capacity_) top_.pop_front();
  }

  void push_bottom(double t, ImageU8 frame) {
    push_check(bottom_last_, t, "bottom");
    bottom_.push_back({t, std::move(frame)});
    if (static_cast<int>(bottom_.size()) > capacity_) bottom_.pop_front();
  }

  bool window_ready(double t) const {
    int count = 0;
    for (auto it = top_.rbegin(); it != top_.rend(); ++it)
      if (it->t <= t && ++count >= kWindowLen) return true;
    return false;
  }

  // One prediction per camera frame tick; Idle until the first full window.
  ActionLabel tick(double t) {
    max_read_ = -std::numeric_limits<double>::infinity();

    int end = static_cast<int>(top_.size()) - 1;
    while (end >= 0 && top_[static_cast<std::size_t>(end)].t > t) --end;
    const int start = end - kWindowLen + 1;
    if (start < 0) return warmup();

    const double frame_period = 1.0 / ck_.norm.camera_rate;
    for (int i = start + 1; i <= end; ++i)
      if (top_[static_cast<std::size_t>(i)].t - top_[static_cast<std::size_t>(i - 1)].t > 2.0 * frame_period)
        return warmup();  // never assemble a window across a stream gap

    Window w;
    auto store = std::make_shared<FrameStore>();
    store->top.reserve(kWindowLen);
    const bool want_bottom = modality().needs_bottom();
    const bool want_imu = modality().needs_imu();
    if (want_bottom) store->bottom.reserve(kWindowLen);
    if (want_imu) w.imu.resize(kWindowLen, kFullGloveWidth);

    const double imu_period = 1.0 / ck_.norm.imu_rate;
    for (int i = 0; i < kWindowLen; ++i) {
      const TimedFrame& f = top_[static_cast<std::size_t>(start + i)];
      read(f.t, t);
      store->top.push_back(f.img);
      if (want_bottom) {
        const int j = nearest_at_or_before(bottom_, f.t, t);
        if (j < 0 || std::abs(bottom_[static_cast<std::size_t>(j)].t - f.t) > 2.0 * frame_period)
          return warmup();
        read(bottom_[static_cast<std::size_t>(j)].t, t);
        store->bottom.push_back(bottom_[static_cast<std::size_t>(j)].img);
      }
      if (want_imu) {
        const int j = nearest_at_or_before(imu_, f.t, t);
        if (j < 0 || std::abs(imu_[static_cast<std::size_t>(j)].t - f.t) > imu_period)
          throw AlignmentGap("no IMU sample within one period of frame at t=" + std::to_string(f.t));
        read(imu_[static_cast<std::size_t>(j)].t, t);
        w.imu.row(i) = imu_[static_cast<std::size_t>(j)].v;
      }
    }
    if (!want_bottom) store->bottom.resize(static_cast<std::size_t>(kWindowLen), ImageU8());
    w.frames = store;
    w.top_index.resize(kWindowLen);
    w.bottom_index.resize(kWindowLen);
    for (int i = 0; i < kWindowLen; ++i) {
      w.top_index[static_cast<std::size_t>(i)] = i;
      w.bottom_index[static_cast<std::size_t>(i)] = i;
    }

    ag::Tape<S> tape(/*grad=*/false);
    const Sample<S> sample = make_sample<S>(w, modality(), ck_.norm.image_stats, ck_.norm.ranges);
    const ag::Var out = model_->logits(tape, sample, nullptr);
    last_logits_ = tape.val(out);
    if (max_read_ > t) ++causality_violations_;
    return label_from_index(argmax_row(last_logits_));
  }

  const Mat<S>& last_logits() const { return last_logits_; }
  std::int64_t causality_violations() const { return causality_violations_; }
  double max_timestamp_read() const { return max_read_; }

 private:
  struct TimedImu {
    double t;
    Eigen::RowVectorXd v;
  };
  struct TimedFrame {
    double t;
    ImageU8 img;
  };

  static void push_check(double& last, double t, const char* what) {
    if (t < last)
      throw NonMonotonicTimestamp(std::string(what) + " sample at t=" + std::to_string(t) +
                                  " precedes t=" + std::to_string(last));
    last = t;
  }

  ActionLabel warmup() {
    last_logits_.resize(0, 0);
    return ActionLabel::Idle;
  }

  // Nearest entry to `q` among those with timestamp <= horizon; ties between
  // an earlier and a later candidate resolve to the earlier one.
  template <class Q>
  static int nearest_at_or_before(const Q& buf, double q, double horizon) {
    int best = -1;
    double best_dist = std::numeric_limits<double>::infinity();
    for (int i = static_cast<int>(buf.size()) - 1; i >= 0; --i) {
      const double ti = buf[static_cast<std::size_t>(i)].t;
      if (ti > horizon) continue;
      const double dist = std::abs(ti - q);
      if (dist < best_dist || (dist == best_dist && best >= 0 && ti < buf[static_cast<std::size_t>(best)].t)) {
        best_dist = dist;
        best = i;
      }
      if (ti < q - best_dist) break;  // receding further; nothing closer remains
    }
    return best;
  }

  void read(double sample_t, double tick_t) {
    max_read_ = std::max(max_read_, sample_t);
    (void)tick_t;
  }

  Checkpoint ck_;
  std::unique_ptr<Model<S>> model_;
  int capacity_;
  std::deque<TimedImu> imu_;
  std::deque<TimedFrame> top_, bottom_;
  double imu_last_ = -std::numeric_limits<double>::infinity();
  double top_last_ = -std::numeric_limits<double>::infinity();
  double bottom_last_ = -std::numeric_limits<double>::infinity();
  Mat<S> last_logits_;
  double max_read_ = -std::numeric_limits<double>::infinity();
  std::int64_t causality_violations_ = 0;
};

struct OnlineModelResult {
  std::string modality;
  double frame_accuracy = 0.0;
  PredictionTrack track;
  double mean_tick_ms = 0.0;
  double max_tick_ms = 0.0;
  std::int64_t causality_violations = 0;
};

// Replays a recording sample-by-sample through push/tick for each checkpoint.
// Events are merged in timestamp order with IMU and bottom frames pushed
// before the top frame that triggers the tick.
template <class S>
std::vector<OnlineModelResult> run_online_eval(const std::vector<Checkpoint>& checkpoints,
                                               const Recording& rec, int capacity = 180) {
  if (rec.annotations.empty()) throw Error("online eval needs an annotated recording");
  if (rec.top.frames.empty()) throw Error("online eval needs camera frames");

  struct Event {
    double t;
    int stream;  // 0 imu, 1 bottom, 2 top
    int index;
  };
  std::vector<Event> events;
  for (int i = 0; i < rec.imu.size(); ++i) events.push_back({rec.imu.t[static_cast<std::size_t>(i)], 0, i});
  for (int i = 0; i < rec.bottom.size(); ++i) events.push_back({rec.bottom.t[static_cast<std::size_t>(i)], 1, i});
  for (int i = 0; i < rec.top.size(); ++i) events.push_back({rec.top.t[static_cast<std::size_t>(i)], 2, i});
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    return a.t != b.t ? a.t < b.t : a.stream < b.stream;
  });

  std::vector<OnlineModelResult> results;
  for (const auto& ck : checkpoints) {
    OnlineClassifier<S> clf(ck, capacity);
    OnlineModelResult res;
    res.modality = ck.modality;
    double tick_ms_sum = 0.0;
    for (const auto& ev : events) {
      switch (ev.stream) {
        case 0: clf.push_imu(ev.t, rec.imu.values.row(ev.index)); break;
        case 1: clf.push_bottom(ev.t, rec.bottom.frames[static_cast<std::size_t>(ev.index)]); break;
        default: {
          clf.push_top(ev.t, rec.top.frames[static_cast<std::size_t>(ev.index)]);
          const auto t0 = std::chrono::steady_clock::now();
          const ActionLabel pred = clf.tick(ev.t);
          const auto t1 = std::chrono::steady_clock::now();
          const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
          tick_ms_sum += ms;
          res.max_tick_ms = std::max(res.max_tick_ms, ms);
          res.track.entries.emplace_back(ev.t, pred);
        }
      }
    }
    res.mean_tick_ms = res.track.entries.empty() ? 0.0 : tick_ms_sum / res.track.entries.size();
    res.frame_accuracy = frame_accuracy(res.track, rec.annotations);
    res.causality_violations = clf.causality_violations();
    results.push_back(std::move(res));
  }
  return results;
}

}  // namespace mmhar
