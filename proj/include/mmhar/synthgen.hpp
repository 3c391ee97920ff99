// Deterministic synthetic stand-in for the data glove + tactile cylinder rig.
// IMU channels are class-conditioned sinusoid templates plus Gaussian noise;
// the two camera views render a uniform marker grid deformed by a moving
// contact blob. All numeric mappings (radii, magnitudes, frequency bands,
// decay constant, bottom-view attenuation) are fixed constants so generated
// data is reproducible byte-for-byte and class structure is measurable.
#pragma once

#include "mmhar/recording.hpp"
#include "mmhar/rng.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace mmhar {

struct ImuRanges {
  double accel = 16.0;   // g
  double gyro = 2000.0;  // deg/s
  double mag = 4900.0;   // uT

  double full_scale(int column) const {
    switch ((column % kChannelsPerSensor) / 3) {
      case 0: return accel;
      case 1: return gyro;
      default: return mag;
    }
  }
};

struct GenParams {
  std::uint64_t seed = 42;
  double imu_rate = 40.0;
  double camera_rate = 30.0;
  int image_size = 224;
  int marker_rows = 12;
  int marker_cols = 8;
  double noise_std = 0.02;
  double clock_jitter_std = 0.002;

  void validate() const {
    if (!(imu_rate > camera_rate && camera_rate > 0.0))
      throw ConfigError("require imu_rate > camera_rate > 0");
    if (marker_rows < 1 || marker_cols < 1) throw ConfigError("marker grid must be non-empty");
    if (image_size < 2 * std::max(marker_rows, marker_cols))
      throw ConfigError("image_size too small for the marker grid");
    if (noise_std < 0.0) throw ConfigError("noise_std must be >= 0");
    if (clock_jitter_std < 0.0) throw ConfigError("clock_jitter_std must be >= 0");
  }
};

struct GenOptions {
  // Skipping frame rendering leaves IMU and annotations byte-identical; used
  // by metadata-only sweeps.
  bool render_frames = true;
};

namespace signal {

constexpr double kMembraneDecayTau = 0.5;     // s, relaxation after release
constexpr double kBottomViewGain = 0.7;       // bottom camera sees a weaker signal
constexpr double kShadingGain = 0.55;         // deformation -> pixel darkening
constexpr double kMarkerPushFrac = 0.04;      // max marker displacement, fraction of width
constexpr double kMotionScale = 0.55;         // peak dimensionless IMU amplitude
constexpr double kPathAmplitude = 0.17;       // blob wander, fraction of image

inline double radius_frac(AreaLevel a) {
  switch (a) {
    case AreaLevel::Small: return 0.08;
    case AreaLevel::Medium: return 0.18;
    case AreaLevel::Large: return 0.35;
    default: return 0.0;
  }
}

inline double contact_magnitude(AttrLevel pressure) {
  switch (pressure) {
    case AttrLevel::Low: return 0.2;
    case AttrLevel::Medium: return 0.5;
    case AttrLevel::High: return 0.9;
    default: return 0.0;
  }
}

inline std::pair<double, double> oscillation_band(AttrLevel freq) {
  switch (freq) {
    case AttrLevel::Low: return {0.2, 0.8};
    case AttrLevel::Medium: return {1.0, 3.0};
    case AttrLevel::High: return {4.0, 8.0};
    default: return {0.0, 0.0};
  }
}

inline double frac01(std::uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

// Each class gets a fixed frequency in the interior of its band so detuned
// per-channel variants stay inside the band.
inline double class_frequency(ActionLabel l) {
  const auto& p = action_profile(l);
  const auto [lo, hi] = oscillation_band(p.frequency);
  if (hi <= 0.0) return 0.0;
  const double u = 0.25 + 0.5 * frac01(mix_seed(hash_str("classfreq"), static_cast<std::uint64_t>(index_of(l))));
  return lo + u * (hi - lo);
}

inline double phase(std::uint64_t tag, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return 2.0 * std::numbers::pi * frac01(mix_seed(tag, a, b, c));
}

struct BlobState {
  bool active = false;
  double cx = 0.5;      // fraction of width
  double cy = 0.5;      // fraction of height
  double sigma = 0.0;   // fraction of width
  double amplitude = 0.0;
};

inline BlobState blob_at(ActionLabel l, double t, std::uint64_t seed, int participant, Hand hand) {
  const auto& p = action_profile(l);
  BlobState b;
  if (p.area == AreaLevel::None) return b;
  const std::uint64_t li = static_cast<std::uint64_t>(index_of(l));
  const std::uint64_t pi = static_cast<std::uint64_t>(participant);
  const std::uint64_t hi = hand == Hand::Right ? 1 : 0;
  const double f = class_frequency(l);
  const double fp = 0.15 + 0.3 * frac01(mix_seed(hash_str("pathfreq"), li));
  const double pshift = phase(mix_seed(hash_str("participant"), seed), pi, hi, 0);
  b.active = true;
  b.sigma = radius_frac(p.area);
  b.cx = 0.5 + kPathAmplitude * std::sin(2.0 * std::numbers::pi * fp * t + phase(hash_str("pathx"), li, pi, hi));
  b.cy = 0.5 + kPathAmplitude * std::sin(2.0 * std::numbers::pi * 0.73 * fp * t + phase(hash_str("pathy"), li, pi, hi));
  b.amplitude = contact_magnitude(p.pressure) *
                (0.55 + 0.45 * std::sin(2.0 * std::numbers::pi * f * t + phase(hash_str("osc"), li, pi, 0) + pshift));
  return b;
}

// Dimensionless IMU template in roughly [-1, 1]; Idle is identically zero.
inline double imu_dimensionless(ActionLabel l, int sensor, int channel, double t,
                                std::uint64_t seed, int participant, Hand hand) {
  const auto& p = action_profile(l);
  if (p.frequency == AttrLevel::None) return 0.0;
  const std::uint64_t li = static_cast<std::uint64_t>(index_of(l));
  const std::uint64_t si = static_cast<std::uint64_t>(sensor);
  const std::uint64_t ci = static_cast<std::uint64_t>(channel);
  const double envelope = (channel / 3 == 0) ? 1.0 : (channel / 3 == 1) ? 0.8 : 0.3;
  const double gate = 0.15 + 0.85 * frac01(mix_seed(hash_str("gate"), li, si));
  const double amp = 0.35 + 0.65 * frac01(mix_seed(hash_str("amp"), li, si, ci));
  const double f = class_frequency(l) * (0.9 + 0.2 * frac01(mix_seed(hash_str("detune"), li, si, ci)));
  double ph = phase(hash_str("imuphase"), li, si, ci);
  ph += 2.0 * std::numbers::pi *
        frac01(mix_seed(hash_str("participantphase"), seed, static_cast<std::uint64_t>(participant), si, ci));
  if (hand == Hand::Left) ph += std::numbers::pi * frac01(mix_seed(hash_str("handphase"), si, ci, 0));
  return kMotionScale * envelope * gate * amp * std::sin(2.0 * std::numbers::pi * f * t + ph);
}

}  // namespace signal

namespace detail {

// Marker grid + deformation blob rasterizer. The bottom view mirrors the blob
// vertically and attenuates deformation by kBottomViewGain.
class TactileRenderer {
 public:
  explicit TactileRenderer(const GenParams& params) : params_(params) {}

  ImageU8 render(const signal::BlobState& blob, bool bottom_view, Rng& noise_rng) const {
    const int n = params_.image_size;
    const double gain = bottom_view ? signal::kBottomViewGain : 1.0;
    signal::BlobState b = blob;
    if (bottom_view && b.active) b.cy = 1.0 - b.cy;

    Mat<double> img = Mat<double>::Constant(n, n, kBackground);
    const double sigma_px = b.sigma * n;
    const double cx = b.cx * n;
    const double cy = b.cy * n;

    // Shading from the deformation field.
    if (b.active && b.amplitude > 0.0 && sigma_px > 0.0) {
      const int lo_r = std::max(0, static_cast<int>(std::floor(cy - 4.0 * sigma_px)));
      const int hi_r = std::min(n - 1, static_cast<int>(std::ceil(cy + 4.0 * sigma_px)));
      const int lo_c = std::max(0, static_cast<int>(std::floor(cx - 4.0 * sigma_px)));
      const int hi_c = std::min(n - 1, static_cast<int>(std::ceil(cx + 4.0 * sigma_px)));
      const double inv2s2 = 1.0 / (2.0 * sigma_px * sigma_px);
      for (int r = lo_r; r <= hi_r; ++r)
        for (int c = lo_c; c <= hi_c; ++c) {
          const double d2 = (r - cy) * (r - cy) + (c - cx) * (c - cx);
          img(r, c) -= signal::kShadingGain * gain * b.amplitude * std::exp(-d2 * inv2s2);
        }
    }

    // Markers, displaced radially away from the contact center.
    const double sigma_dot = std::max(0.9, 0.012 * n);
    const int dot_ext = static_cast<int>(std::ceil(3.0 * sigma_dot));
    const double inv2d2 = 1.0 / (2.0 * sigma_dot * sigma_dot);
    for (int i = 0; i < params_.marker_rows; ++i)
      for (int j = 0; j < params_.marker_cols; ++j) {
        double my = (i + 0.5) * n / params_.marker_rows;
        double mx = (j + 0.5) * n / params_.marker_cols;
        if (b.active && b.amplitude > 0.0 && sigma_px > 0.0) {
          const double dy = my - cy;
          const double dx = mx - cx;
          const double dist = std::sqrt(dx * dx + dy * dy) + 1e-9;
          const double d = gain * b.amplitude * std::exp(-dist * dist / (2.0 * sigma_px * sigma_px));
          const double push = signal::kMarkerPushFrac * n * d;
          my += push * dy / dist;
          mx += push * dx / dist;
        }
        const int lo_r = std::max(0, static_cast<int>(std::floor(my - dot_ext)));
        const int hi_r = std::min(n - 1, static_cast<int>(std::ceil(my + dot_ext)));
        const int lo_c = std::max(0, static_cast<int>(std::floor(mx - dot_ext)));
        const int hi_c = std::min(n - 1, static_cast<int>(std::ceil(mx + dot_ext)));
        for (int r = lo_r; r <= hi_r; ++r)
          for (int c = lo_c; c <= hi_c; ++c) {
            const double d2 = (r - my) * (r - my) + (c - mx) * (c - mx);
            img(r, c) += kDotAmplitude * std::exp(-d2 * inv2d2);
          }
      }

    ImageU8 out(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) {
        double v = img(r, c) + params_.noise_std * noise_rng.gaussian();
        v = std::clamp(v, 0.0, 1.0);
        out(r, c) = static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
    return out;
  }

  static constexpr double kBackground = 0.35;
  static constexpr double kDotAmplitude = 0.45;

 private:
  GenParams params_;
};

inline std::vector<double> jittered_timestamps(double duration, double rate, double jitter_std, Rng& rng) {
  const int n = static_cast<int>(std::ceil(duration * rate - 1e-9));
  std::vector<double> t(static_cast<std::size_t>(n));
  double prev = -1.0;
  for (int i = 0; i < n; ++i) {
    double ti = i / rate + jitter_std * rng.gaussian();
    ti = std::max({ti, 0.0, prev + 1e-6});
    t[static_cast<std::size_t>(i)] = ti;
    prev = ti;
  }
  return t;
}

// Timeline of (label, start, end) segments; pauses carry the preceding
// action's frozen blob state decaying with the membrane time constant.
struct Segment {
  ActionLabel label;
  double t0 = 0.0;
  double t1 = 0.0;
  bool pause = false;
  int action_index = -1;  // index of the preceding action for pauses
};

inline signal::BlobState blob_for_time(const std::vector<Segment>& timeline, double t,
                                       std::uint64_t seed, int participant, Hand hand) {
  for (const auto& seg : timeline) {
    if (t >= seg.t1) continue;
    if (!seg.pause) return signal::blob_at(seg.label, t, seed, participant, hand);
    if (seg.action_index < 0) return {};
    const auto& prev = timeline[static_cast<std::size_t>(seg.action_index)];
    signal::BlobState b = signal::blob_at(prev.label, prev.t1, seed, participant, hand);
    b.amplitude *= std::exp(-(t - prev.t1) / signal::kMembraneDecayTau);
    return b;
  }
  return {};
}

inline ActionLabel label_for_time(const std::vector<Segment>& timeline, double t) {
  for (const auto& seg : timeline)
    if (t < seg.t1 && t >= seg.t0) return seg.pause ? ActionLabel::Idle : seg.label;
  return ActionLabel::Idle;
}

inline Recording gen_from_timeline(const std::vector<Segment>& timeline, double total,
                                   Hand hand, const GenParams& params, int participant,
                                   const GenOptions& opts, const std::string& id) {
  const std::uint64_t base = mix_seed(params.seed, hash_str(id));
  Rng imu_jitter(mix_seed(base, 1));
  Rng imu_noise(mix_seed(base, 2));
  Rng frame_jitter(mix_seed(base, 3));
  Rng top_noise(mix_seed(base, 4));
  Rng bot_noise(mix_seed(base, 5));
  const ImuRanges ranges;

  Recording rec;
  rec.meta.id = id;
  rec.meta.participant = participant;
  rec.meta.hand = hand;
  rec.meta.source = "synthetic";
  rec.meta.imu_rate = params.imu_rate;
  rec.meta.camera_rate = params.camera_rate;

  rec.imu.t = jittered_timestamps(total, params.imu_rate, params.clock_jitter_std, imu_jitter);
  rec.imu.values.resize(static_cast<Eigen::Index>(rec.imu.t.size()), kFullGloveWidth);
  for (std::size_t i = 0; i < rec.imu.t.size(); ++i) {
    const double t = rec.imu.t[i];
    const ActionLabel l = label_for_time(timeline, t);
    for (int s = 0; s < kNumSensors; ++s)
      for (int k = 0; k < kChannelsPerSensor; ++k) {
        const double u = signal::imu_dimensionless(l, s, k, t, params.seed, participant, hand) +
                         params.noise_std * imu_noise.gaussian();
        rec.imu.values(static_cast<Eigen::Index>(i), s * kChannelsPerSensor + k) =
            u * ranges.full_scale(s * kChannelsPerSensor + k);
      }
  }

  // Frame timestamps are kept even when pixels are skipped so segmentation
  // and labeling still work on metadata-only recordings.
  const std::vector<double> frame_ts =
      jittered_timestamps(total, params.camera_rate, params.clock_jitter_std, frame_jitter);
  rec.top.t = frame_ts;
  rec.bottom.t = frame_ts;
  if (opts.render_frames) {
    TactileRenderer renderer(params);
    rec.top.frames.reserve(frame_ts.size());
    rec.bottom.frames.reserve(frame_ts.size());
    for (double t : frame_ts) {
      const signal::BlobState blob = blob_for_time(timeline, t, params.seed, participant, hand);
      rec.top.frames.push_back(renderer.render(blob, false, top_noise));
      rec.bottom.frames.push_back(renderer.render(blob, true, bot_noise));
    }
  }

  std::vector<AnnotationSpan> spans;
  for (const auto& seg : timeline)
    spans.push_back({seg.t0, seg.t1, seg.pause ? ActionLabel::Idle : seg.label});
  rec.annotations = AnnotationTrack(std::move(spans));
  rec.validate();
  return rec;
}

}  // namespace detail

inline Recording gen_segment(ActionLabel label, double duration_s, Hand hand,
                             const GenParams& params, int participant = 0,
                             const GenOptions& opts = {}) {
  params.validate();
  if (!(duration_s > 0.0)) throw Error("gen_segment requires positive duration");
  const std::string id = "p" + std::string(participant < 10 ? "0" : "") + std::to_string(participant) +
                         "_" + std::string(hand_name(hand)) + "_" + std::string(label_name(label));
  const std::vector<detail::Segment> timeline = {{label, 0.0, duration_s, false, -1}};
  return detail::gen_from_timeline(timeline, duration_s, hand, params, participant, opts, id);
}

// One segment per participant x label x hand.
inline std::vector<Recording> gen_segmented_dataset(int participants, double segment_seconds,
                                                    const GenParams& params,
                                                    const GenOptions& opts = {}) {
  params.validate();
  if (participants < 1) throw Error("need at least one participant");
  std::vector<Recording> out;
  out.reserve(static_cast<std::size_t>(participants) * kNumClasses * 2);
  for (int p = 0; p < participants; ++p)
    for (int l = 0; l < kNumClasses; ++l)
      for (Hand hand : {Hand::Left, Hand::Right})
        out.push_back(gen_segment(label_from_index(l), segment_seconds, hand, params, p, opts));
  return out;
}

inline Recording gen_continuous_sequence(const std::vector<ActionLabel>& order, double action_s,
                                         double pause_s, const GenParams& params,
                                         int participant = 0, Hand hand = Hand::Right,
                                         const GenOptions& opts = {}) {
  params.validate();
  if (order.empty()) throw Error("gen_continuous_sequence requires a non-empty action order");
  if (!(action_s > 0.0 && pause_s > 0.0)) throw Error("durations must be positive");

  std::vector<detail::Segment> timeline;
  double t = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    timeline.push_back({order[k], t, t + action_s, false, -1});
    t += action_s;
    if (k + 1 < order.size()) {
      timeline.push_back({ActionLabel::Idle, t, t + pause_s, true,
                          static_cast<int>(timeline.size()) - 1});
      t += pause_s;
    }
  }
  const std::string id = "seq_p" + std::string(participant < 10 ? "0" : "") + std::to_string(participant) +
                         "_" + std::string(hand_name(hand)) + "_n" + std::to_string(order.size());
  return detail::gen_from_timeline(timeline, t, hand, params, participant, opts, id);
}

}  // namespace mmhar
