// The three classifier families: an IMU temporal transformer with
// configuration-scaled input width, single/dual-stream factorized video
// transformers over tubelet tokens, and late-fusion heads combining branch
// features. Plus the self-describing checkpoint container.
#pragma once

#include "mmhar/core.hpp"
#include "mmhar/nn.hpp"
#include "mmhar/pipeline.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

namespace mmhar {

enum class HeadMode { Features, Logits };

struct HartConfig {
  int input_width = kFullGloveWidth;
  int model_dim = 64;
  int heads = 4;
  int encoder_layers = 4;
  int mlp_dim = 128;
  double dropout = 0.1;
  int classes = kNumClasses;
  int seq_len = kWindowLen;

  void validate() const {
    if (input_width < 1 || model_dim < 1 || heads < 1 || encoder_layers < 1 || mlp_dim < 1 ||
        classes < 2 || seq_len < 1)
      throw ConfigError("invalid HART config");
    if (model_dim % heads != 0) throw ConfigError("model_dim must be divisible by heads");
  }
};

struct VivitConfig {
  int image_size = 224;
  int frames = kWindowLen;
  int tubelet_t = 10;
  int tubelet_h = 16;
  int tubelet_w = 16;
  int model_dim = 96;
  int heads = 4;
  int spatial_layers = 4;
  int temporal_layers = 2;
  int mlp_dim = 192;
  int classes = kNumClasses;
  double dropout = 0.1;

  int temporal_groups() const { return frames / tubelet_t; }
  int grid_h() const { return image_size / tubelet_h; }
  int grid_w() const { return image_size / tubelet_w; }
  int spatial_tokens() const { return grid_h() * grid_w(); }
  int token_count() const { return temporal_groups() * spatial_tokens(); }
  int tubelet_dim() const { return tubelet_t * tubelet_h * tubelet_w; }

  void validate() const {
    if (image_size < 1 || frames < 1 || model_dim < 1 || heads < 1 || spatial_layers < 1 ||
        temporal_layers < 1 || mlp_dim < 1 || classes < 2)
      throw ConfigError("invalid ViViT config");
    if (frames % tubelet_t != 0)
      throw TubeletMismatch("frames not divisible by tubelet_t");
    if (image_size % tubelet_h != 0 || image_size % tubelet_w != 0)
      throw TubeletMismatch("image_size not divisible by tubelet h/w");
    if (model_dim % heads != 0) throw ConfigError("model_dim must be divisible by heads");
  }
};

struct FusionConfig {
  std::vector<int> branch_dims;
  int hidden_dim = 128;
  int classes = kNumClasses;

  int input_width() const {
    int w = 0;
    for (int d : branch_dims) w += d;
    return w;
  }
};

// IMU branch: per-timestep linear embedding, learned positional embedding,
// pre-norm encoder stack, mean pool over time.
template <class S>
class HartNet {
 public:
  HartNet(HartConfig cfg, nn::ParamStore<S>& store, const std::string& prefix, std::uint64_t seed,
          bool with_head)
      : cfg_(cfg), store_(&store) {
    cfg_.validate();
    embed_w_ = store.add(prefix + ".embed.w", nn::init::xavier_uniform<S>(cfg_.input_width, cfg_.model_dim,
                                                                          seed, prefix + ".embed.w"));
    embed_b_ = store.add(prefix + ".embed.b", Mat<S>::Zero(1, cfg_.model_dim));
    pos_ = store.add(prefix + ".pos",
                     nn::init::gaussian<S>(cfg_.seq_len, cfg_.model_dim, 0.02, seed, prefix + ".pos"));
    for (int l = 0; l < cfg_.encoder_layers; ++l)
      blocks_.push_back(nn::add_encoder_block<S>(store, prefix + ".enc." + std::to_string(l),
                                                 cfg_.model_dim, cfg_.mlp_dim, seed));
    if (with_head) {
      head_w_ = store.add(prefix + ".head.w", nn::init::xavier_uniform<S>(cfg_.model_dim, cfg_.classes,
                                                                          seed, prefix + ".head.w"));
      head_b_ = store.add(prefix + ".head.b", Mat<S>::Zero(1, cfg_.classes));
    }
  }

  const HartConfig& config() const { return cfg_; }

  ag::Var forward(ag::Tape<S>& t, const Mat<S>& window, HeadMode mode,
                  const nn::TrainCtx* ctx = nullptr) const {
    if (window.rows() != cfg_.seq_len || window.cols() != cfg_.input_width)
      throw ShapeMismatch("HART input must be " + std::to_string(cfg_.seq_len) + "x" +
                          std::to_string(cfg_.input_width) + ", got " + std::to_string(window.rows()) +
                          "x" + std::to_string(window.cols()));
    if (!window.allFinite()) throw Error("HART input contains non-finite values");
    const auto& p = *store_;
    ag::Var x = nn::linear(t, t.input(window), p, embed_w_, embed_b_);
    x = t.add(x, t.param(p.value(pos_), pos_));
    for (const auto& b : blocks_)
      x = nn::encoder_block(t, x, p, b, /*groups=*/1, cfg_.heads, cfg_.dropout, ctx);
    ag::Var pooled = t.mean_rows(x, 1);
    if (mode == HeadMode::Features) return pooled;
    if (head_w_ < 0) throw Error("HART built without a classification head");
    return nn::linear(t, pooled, p, head_w_, head_b_);
  }

 private:
  HartConfig cfg_;
  nn::ParamStore<S>* store_;
  int embed_w_, embed_b_, pos_;
  std::vector<nn::EncoderBlockSlots> blocks_;
  int head_w_ = -1, head_b_ = -1;
};

// Video branch: non-overlapping tubelet embedding, factorized encoder
// (spatial attention within each temporal index, then temporal attention over
// per-time pooled tokens), mean pool.
template <class S>
class VivitNet {
 public:
  VivitNet(VivitConfig cfg, nn::ParamStore<S>& store, const std::string& prefix, std::uint64_t seed,
           bool with_head)
      : cfg_(cfg), store_(&store) {
    cfg_.validate();
    tub_w_ = store.add(prefix + ".tubelet.w", nn::init::xavier_uniform<S>(cfg_.tubelet_dim(), cfg_.model_dim,
                                                                          seed, prefix + ".tubelet.w"));
    tub_b_ = store.add(prefix + ".tubelet.b", Mat<S>::Zero(1, cfg_.model_dim));
    pos_spatial_ = store.add(prefix + ".pos_spatial",
                             nn::init::gaussian<S>(cfg_.spatial_tokens(), cfg_.model_dim, 0.02, seed,
                                                   prefix + ".pos_spatial"));
    pos_temporal_ = store.add(prefix + ".pos_temporal",
                              nn::init::gaussian<S>(cfg_.temporal_groups(), cfg_.model_dim, 0.02, seed,
                                                    prefix + ".pos_temporal"));
    for (int l = 0; l < cfg_.spatial_layers; ++l)
      blocks_spatial_.push_back(nn::add_encoder_block<S>(store, prefix + ".spatial." + std::to_string(l),
                                                         cfg_.model_dim, cfg_.mlp_dim, seed));
    for (int l = 0; l < cfg_.temporal_layers; ++l)
      blocks_temporal_.push_back(nn::add_encoder_block<S>(store, prefix + ".temporal." + std::to_string(l),
                                                          cfg_.model_dim, cfg_.mlp_dim, seed));
    if (with_head) {
      head_w_ = store.add(prefix + ".head.w", nn::init::xavier_uniform<S>(cfg_.model_dim, cfg_.classes,
                                                                          seed, prefix + ".head.w"));
      head_b_ = store.add(prefix + ".head.b", Mat<S>::Zero(1, cfg_.classes));
    }
  }

  const VivitConfig& config() const { return cfg_; }

  // frames: (frames x image_size^2), pixels in row-major scan order.
  ag::Var forward(ag::Tape<S>& t, const Mat<S>& frames, HeadMode mode,
                  const nn::TrainCtx* ctx = nullptr) const {
    const int s = cfg_.image_size;
    if (frames.rows() != cfg_.frames || frames.cols() != static_cast<Eigen::Index>(s) * s)
      throw ShapeMismatch("ViViT input must be " + std::to_string(cfg_.frames) + "x" +
                          std::to_string(s * s) + ", got " + std::to_string(frames.rows()) + "x" +
                          std::to_string(frames.cols()));
    const auto& p = *store_;
    ag::Var x = nn::linear(t, t.input(tubelet_tokens(frames)), p, tub_w_, tub_b_);
    x = t.add_tiled(x, t.param(p.value(pos_spatial_), pos_spatial_), cfg_.temporal_groups());
    for (const auto& b : blocks_spatial_)
      x = nn::encoder_block(t, x, p, b, cfg_.temporal_groups(), cfg_.heads, cfg_.dropout, ctx);
    ag::Var tokens_t = t.mean_rows(x, cfg_.temporal_groups());
    tokens_t = t.add(tokens_t, t.param(p.value(pos_temporal_), pos_temporal_));
    for (const auto& b : blocks_temporal_)
      tokens_t = nn::encoder_block(t, tokens_t, p, b, /*groups=*/1, cfg_.heads, cfg_.dropout, ctx);
    ag::Var pooled = t.mean_rows(tokens_t, 1);
    if (mode == HeadMode::Features) return pooled;
    if (head_w_ < 0) throw Error("ViViT built without a classification head");
    return nn::linear(t, pooled, p, head_w_, head_b_);
  }

 private:
  // Rearranges (T x S^2) frames into (tokens x tubelet_dim) rows, temporal
  // group major, then spatial grid row-major; within a token dt, then r, c.
  Mat<S> tubelet_tokens(const Mat<S>& frames) const {
    const int s = cfg_.image_size;
    const int gh = cfg_.grid_h(), gw = cfg_.grid_w();
    const int th = cfg_.tubelet_h, tw = cfg_.tubelet_w, tt = cfg_.tubelet_t;
    Mat<S> tokens(cfg_.token_count(), cfg_.tubelet_dim());
    for (int g = 0; g < cfg_.temporal_groups(); ++g)
      for (int py = 0; py < gh; ++py)
        for (int px = 0; px < gw; ++px) {
          const Eigen::Index row = static_cast<Eigen::Index>(g) * cfg_.spatial_tokens() + py * gw + px;
          Eigen::Index col = 0;
          for (int dt = 0; dt < tt; ++dt)
            for (int r = 0; r < th; ++r)
              for (int c = 0; c < tw; ++c)
                tokens(row, col++) = frames(g * tt + dt, (py * th + r) * s + px * tw + c);
        }
    return tokens;
  }

  VivitConfig cfg_;
  nn::ParamStore<S>* store_;
  int tub_w_, tub_b_, pos_spatial_, pos_temporal_;
  std::vector<nn::EncoderBlockSlots> blocks_spatial_, blocks_temporal_;
  int head_w_ = -1, head_b_ = -1;
};

// Late fusion: concatenated branch features -> hidden fully connected stage
// with nonlinearity -> class head.
template <class S>
class FusionHead {
 public:
  FusionHead(FusionConfig cfg, nn::ParamStore<S>& store, const std::string& prefix, std::uint64_t seed)
      : cfg_(cfg), store_(&store) {
    w1_ = store.add(prefix + ".fc.w", nn::init::xavier_uniform<S>(cfg_.input_width(), cfg_.hidden_dim,
                                                                  seed, prefix + ".fc.w"));
    b1_ = store.add(prefix + ".fc.b", Mat<S>::Zero(1, cfg_.hidden_dim));
    w2_ = store.add(prefix + ".out.w", nn::init::xavier_uniform<S>(cfg_.hidden_dim, cfg_.classes,
                                                                   seed, prefix + ".out.w"));
    b2_ = store.add(prefix + ".out.b", Mat<S>::Zero(1, cfg_.classes));
  }

  const FusionConfig& config() const { return cfg_; }

  ag::Var forward(ag::Tape<S>& t, ag::Var features) const {
    if (t.val(features).cols() != cfg_.input_width())
      throw ShapeMismatch("fusion input width mismatch");
    return nn::linear(t, t.gelu(nn::linear(t, features, *store_, w1_, b1_)), *store_, w2_, b2_);
  }

 private:
  FusionConfig cfg_;
  nn::ParamStore<S>* store_;
  int w1_, b1_, w2_, b2_;
};

template <class S>
struct Sample {
  Mat<S> imu;     // seq_len x F
  Mat<S> top;     // frames x S^2
  Mat<S> bottom;  // frames x S^2
};

struct ModelPresets {
  HartConfig hart;      // input_width is set per sensor configuration
  VivitConfig vivit;
  int fusion_hidden = 128;

  static ModelPresets desk() {
    ModelPresets p;
    p.vivit.image_size = 56;
    p.vivit.tubelet_h = 8;
    p.vivit.tubelet_w = 8;
    return p;
  }
  static ModelPresets paper() { return ModelPresets{}; }
};

template <class S>
class Model {
 public:
  virtual ~Model() = default;
  virtual ag::Var logits(ag::Tape<S>& t, const Sample<S>& in, const nn::TrainCtx* ctx = nullptr) const = 0;

  nn::ParamStore<S>& params() { return params_; }
  const nn::ParamStore<S>& params() const { return params_; }
  const InputModality& modality() const { return modality_; }
  const ModelPresets& presets() const { return presets_; }

 protected:
  Model(InputModality m, ModelPresets presets) : modality_(std::move(m)), presets_(presets) {}

  nn::ParamStore<S> params_;
  InputModality modality_;
  ModelPresets presets_;
};

template <class S>
class MbcModel final : public Model<S> {
 public:
  MbcModel(InputModality m, ModelPresets presets, std::uint64_t seed)
      : Model<S>(m, presets),
        hart_(with_width(presets.hart, feature_width(*m.config)), this->params_, "hart", seed, true) {}

  ag::Var logits(ag::Tape<S>& t, const Sample<S>& in, const nn::TrainCtx* ctx) const override {
    return hart_.forward(t, in.imu, HeadMode::Logits, ctx);
  }

  const HartNet<S>& hart() const { return hart_; }

 private:
  static HartConfig with_width(HartConfig c, int width) {
    c.input_width = width;
    return c;
  }
  HartNet<S> hart_;
};

template <class S>
class TbcSingleModel final : public Model<S> {
 public:
  TbcSingleModel(InputModality m, ModelPresets presets, std::uint64_t seed)
      : Model<S>(m, presets),
        use_bottom_(m.kind == ModalityKind::TBC1Bot),
        vivit_(presets.vivit, this->params_, "vivit", seed, true) {}

  ag::Var logits(ag::Tape<S>& t, const Sample<S>& in, const nn::TrainCtx* ctx) const override {
    return vivit_.forward(t, use_bottom_ ? in.bottom : in.top, HeadMode::Logits, ctx);
  }

  const VivitNet<S>& vivit() const { return vivit_; }

 private:
  bool use_bottom_;
  VivitNet<S> vivit_;
};

// Two independently parameterized video backbones fused before the head.
template <class S>
class Tbc2Model final : public Model<S> {
 public:
  Tbc2Model(InputModality m, ModelPresets presets, std::uint64_t seed)
      : Model<S>(m, presets),
        top_(presets.vivit, this->params_, "vivit_top", seed, false),
        bottom_(presets.vivit, this->params_, "vivit_bottom", seed, false),
        fusion_({{presets.vivit.model_dim, presets.vivit.model_dim}, presets.fusion_hidden,
                 presets.vivit.classes},
                this->params_, "fusion", seed) {}

  ag::Var logits(ag::Tape<S>& t, const Sample<S>& in, const nn::TrainCtx* ctx) const override {
    ag::Var ft = top_.forward(t, in.top, HeadMode::Features, ctx);
    ag::Var fb = bottom_.forward(t, in.bottom, HeadMode::Features, ctx);
    return fusion_.forward(t, t.concat_cols({ft, fb}));
  }

 private:
  VivitNet<S> top_, bottom_;
  FusionHead<S> fusion_;
};

// Three-branch late fusion: one IMU branch and two video branches.
template <class S>
class MmcModel final : public Model<S> {
 public:
  MmcModel(InputModality m, ModelPresets presets, std::uint64_t seed)
      : Model<S>(m, presets),
        hart_(with_width(presets.hart, feature_width(*m.config)), this->params_, "hart", seed, false),
        top_(presets.vivit, this->params_, "vivit_top", seed, false),
        bottom_(presets.vivit, this->params_, "vivit_bottom", seed, false),
        fusion_({{presets.hart.model_dim, presets.vivit.model_dim, presets.vivit.model_dim},
                 presets.fusion_hidden, presets.vivit.classes},
                this->params_, "fusion", seed) {}

  ag::Var logits(ag::Tape<S>& t, const Sample<S>& in, const nn::TrainCtx* ctx) const override {
    ag::Var fi = hart_.forward(t, in.imu, HeadMode::Features, ctx);
    ag::Var ft = top_.forward(t, in.top, HeadMode::Features, ctx);
    ag::Var fb = bottom_.forward(t, in.bottom, HeadMode::Features, ctx);
    return fusion_.forward(t, t.concat_cols({fi, ft, fb}));
  }

 private:
  static HartConfig with_width(HartConfig c, int width) {
    c.input_width = width;
    return c;
  }
  HartNet<S> hart_;
  VivitNet<S> top_, bottom_;
  FusionHead<S> fusion_;
};

// Constructs one of the 17 variants with seeded, reproducible initialization.
template <class S>
std::unique_ptr<Model<S>> build_model(const InputModality& modality, const ModelPresets& presets,
                                      std::uint64_t seed) {
  switch (modality.kind) {
    case ModalityKind::MBC: return std::make_unique<MbcModel<S>>(modality, presets, seed);
    case ModalityKind::TBC1Top:
    case ModalityKind::TBC1Bot: return std::make_unique<TbcSingleModel<S>>(modality, presets, seed);
    case ModalityKind::TBC2: return std::make_unique<Tbc2Model<S>>(modality, presets, seed);
    case ModalityKind::MMC: return std::make_unique<MmcModel<S>>(modality, presets, seed);
  }
  throw Error("invalid modality kind");
}

// ---------------------------------------------------------------------------
// Checkpoints: modality tag + config records + parameter arrays (stored as
// doubles) + the pipeline normalization metadata needed at inference time.

struct NormMeta {
  SplitStats image_stats;
  StatsSource stats_source = StatsSource::PerSplit;
  ImuRanges ranges;
  double imu_rate = 40.0;
  double camera_rate = 30.0;
};

struct Checkpoint {
  std::string modality;
  std::string preset = "desk";
  HartConfig hart;
  VivitConfig vivit;
  int fusion_hidden = 128;
  NormMeta norm;
  std::vector<std::pair<std::string, MatD>> params;

  ModelPresets presets() const {
    ModelPresets p;
    p.hart = hart;
    p.vivit = vivit;
    p.fusion_hidden = fusion_hidden;
    return p;
  }

  template <class SOut>
  std::unique_ptr<Model<SOut>> instantiate() const {
    auto model = build_model<SOut>(modality_from_name(modality), presets(), /*seed=*/0);
    auto& store = model->params();
    if (static_cast<int>(params.size()) != store.size())
      throw Error("checkpoint parameter count mismatch");
    for (int s = 0; s < store.size(); ++s) {
      const auto& [name, value] = params[static_cast<std::size_t>(s)];
      if (name != store.name(s)) throw Error("checkpoint parameter order mismatch at " + name);
      if (value.rows() != store.value(s).rows() || value.cols() != store.value(s).cols())
        throw ShapeMismatch("checkpoint parameter shape mismatch at " + name);
      store.value(s) = value.cast<SOut>();
    }
    return model;
  }

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);
};

template <class S>
Checkpoint make_checkpoint(const Model<S>& model, const std::string& preset, const NormMeta& norm) {
  Checkpoint ck;
  ck.modality = model.modality().name();
  ck.preset = preset;
  ck.hart = model.presets().hart;
  if (model.modality().config) ck.hart.input_width = feature_width(*model.modality().config);
  ck.vivit = model.presets().vivit;
  ck.fusion_hidden = model.presets().fusion_hidden;
  ck.norm = norm;
  const auto& store = model.params();
  for (int s = 0; s < store.size(); ++s)
    ck.params.emplace_back(store.name(s), store.value(s).template cast<double>());
  return ck;
}

namespace detail {

inline nlohmann::json hart_to_json(const HartConfig& c) {
  return {{"input_width", c.input_width}, {"model_dim", c.model_dim}, {"heads", c.heads},
          {"encoder_layers", c.encoder_layers}, {"mlp_dim", c.mlp_dim}, {"dropout", c.dropout},
          {"classes", c.classes}, {"seq_len", c.seq_len}};
}

inline HartConfig hart_from_json(const nlohmann::json& j) {
  HartConfig c;
  c.input_width = j.at("input_width");
  c.model_dim = j.at("model_dim");
  c.heads = j.at("heads");
  c.encoder_layers = j.at("encoder_layers");
  c.mlp_dim = j.at("mlp_dim");
  c.dropout = j.at("dropout");
  c.classes = j.at("classes");
  c.seq_len = j.at("seq_len");
  return c;
}

inline nlohmann::json vivit_to_json(const VivitConfig& c) {
  return {{"image_size", c.image_size}, {"frames", c.frames}, {"tubelet_t", c.tubelet_t},
          {"tubelet_h", c.tubelet_h}, {"tubelet_w", c.tubelet_w}, {"model_dim", c.model_dim},
          {"heads", c.heads}, {"spatial_layers", c.spatial_layers},
          {"temporal_layers", c.temporal_layers}, {"mlp_dim", c.mlp_dim}, {"classes", c.classes},
          {"dropout", c.dropout}};
}

inline VivitConfig vivit_from_json(const nlohmann::json& j) {
  VivitConfig c;
  c.image_size = j.at("image_size");
  c.frames = j.at("frames");
  c.tubelet_t = j.at("tubelet_t");
  c.tubelet_h = j.at("tubelet_h");
  c.tubelet_w = j.at("tubelet_w");
  c.model_dim = j.at("model_dim");
  c.heads = j.at("heads");
  c.spatial_layers = j.at("spatial_layers");
  c.temporal_layers = j.at("temporal_layers");
  c.mlp_dim = j.at("mlp_dim");
  c.classes = j.at("classes");
  c.dropout = j.at("dropout");
  return c;
}

}  // namespace detail

inline void Checkpoint::save(const std::filesystem::path& path) const {
  nlohmann::json header;
  header["format"] = 1;
  header["modality"] = modality;
  header["preset"] = preset;
  header["hart"] = detail::hart_to_json(hart);
  header["vivit"] = detail::vivit_to_json(vivit);
  header["fusion_hidden"] = fusion_hidden;
  header["norm"] = {{"image_mean", norm.image_stats.mean}, {"image_std", norm.image_stats.std},
                    {"image_size", norm.image_stats.image_size},
                    {"stats_source", norm.stats_source == StatsSource::PerSplit ? "per_split" : "train_only"},
                    {"accel_range", norm.ranges.accel}, {"gyro_range", norm.ranges.gyro},
                    {"mag_range", norm.ranges.mag}, {"imu_rate", norm.imu_rate},
                    {"camera_rate", norm.camera_rate}};
  nlohmann::json plist = nlohmann::json::array();
  for (const auto& [name, value] : params)
    plist.push_back({{"name", name}, {"rows", value.rows()}, {"cols", value.cols()}});
  header["params"] = plist;

  const std::string hs = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path.string());
  out << "MMHARCK1\n";
  const std::uint64_t len = hs.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const auto& [name, value] : params)
    for (Eigen::Index i = 0; i < value.rows(); ++i)
      for (Eigen::Index j = 0; j < value.cols(); ++j) {
        const double v = value(i, j);
        out.write(reinterpret_cast<const char*>(&v), sizeof(v));
      }
  if (!out) throw IoError("short checkpoint write: " + path.string());
}

inline Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint: " + path.string());
  std::string magic(9, '\0');
  in.read(magic.data(), 9);
  if (magic != "MMHARCK1\n") throw IoError("bad checkpoint magic in " + path.string());
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string hs(len, '\0');
  in.read(hs.data(), static_cast<std::streamsize>(len));
  if (!in) throw IoError("truncated checkpoint header: " + path.string());
  const nlohmann::json header = nlohmann::json::parse(hs);

  Checkpoint ck;
  ck.modality = header.at("modality").get<std::string>();
  ck.preset = header.at("preset").get<std::string>();
  ck.hart = detail::hart_from_json(header.at("hart"));
  ck.vivit = detail::vivit_from_json(header.at("vivit"));
  ck.fusion_hidden = header.at("fusion_hidden");
  const auto& n = header.at("norm");
  ck.norm.image_stats.mean = n.at("image_mean");
  ck.norm.image_stats.std = n.at("image_std");
  ck.norm.image_stats.image_size = n.at("image_size");
  ck.norm.stats_source =
      n.at("stats_source") == "per_split" ? StatsSource::PerSplit : StatsSource::TrainOnly;
  ck.norm.ranges.accel = n.at("accel_range");
  ck.norm.ranges.gyro = n.at("gyro_range");
  ck.norm.ranges.mag = n.at("mag_range");
  ck.norm.imu_rate = n.at("imu_rate");
  ck.norm.camera_rate = n.at("camera_rate");

  for (const auto& pj : header.at("params")) {
    MatD value(pj.at("rows").get<Eigen::Index>(), pj.at("cols").get<Eigen::Index>());
    for (Eigen::Index i = 0; i < value.rows(); ++i)
      for (Eigen::Index j = 0; j < value.cols(); ++j) {
        double v = 0.0;
        in.read(reinterpret_cast<char*>(&v), sizeof(v));
        value(i, j) = v;
      }
    ck.params.emplace_back(pj.at("name").get<std::string>(), std::move(value));
  }
  if (!in) throw IoError("truncated checkpoint payload: " + path.string());
  return ck;
}

}  // namespace mmhar
