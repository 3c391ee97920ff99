#include "mmhar/models.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <set>

using namespace mmhar;

namespace {

// Miniature double-precision presets for finite-difference checks.
ModelPresets mini_presets() {
  ModelPresets p;
  p.hart.model_dim = 8;
  p.hart.heads = 2;
  p.hart.encoder_layers = 1;
  p.hart.mlp_dim = 16;
  p.hart.seq_len = 10;
  p.hart.dropout = 0.0;
  p.vivit.image_size = 16;
  p.vivit.frames = 10;
  p.vivit.tubelet_t = 5;
  p.vivit.tubelet_h = 8;
  p.vivit.tubelet_w = 8;
  p.vivit.model_dim = 8;
  p.vivit.heads = 2;
  p.vivit.spatial_layers = 1;
  p.vivit.temporal_layers = 1;
  p.vivit.mlp_dim = 16;
  p.vivit.dropout = 0.0;
  p.fusion_hidden = 8;
  return p;
}

template <class S>
Sample<S> random_sample(const InputModality& m, const ModelPresets& p, std::uint64_t seed) {
  Rng rng(seed);
  Sample<S> s;
  if (m.needs_imu()) {
    s.imu.resize(p.hart.seq_len, feature_width(*m.config));
    for (Eigen::Index i = 0; i < s.imu.rows(); ++i)
      for (Eigen::Index j = 0; j < s.imu.cols(); ++j) s.imu(i, j) = static_cast<S>(rng.uniform(-1, 1));
  }
  auto fill = [&](Mat<S>& dst) {
    dst.resize(p.vivit.frames, p.vivit.image_size * p.vivit.image_size);
    for (Eigen::Index i = 0; i < dst.rows(); ++i)
      for (Eigen::Index j = 0; j < dst.cols(); ++j) dst(i, j) = static_cast<S>(rng.gaussian());
  };
  if (m.needs_top()) fill(s.top);
  if (m.needs_bottom()) fill(s.bottom);
  return s;
}

template <class S>
Mat<S> forward_logits(const Model<S>& model, const Sample<S>& s) {
  ag::Tape<S> tape(/*grad=*/false);
  return tape.val(model.logits(tape, s, nullptr));
}

// Central finite differences on `count` randomly sampled parameters.
void fd_check_model(Model<double>& model, const Sample<double>& sample, int label, int count,
                    std::uint64_t pick_seed) {
  auto loss_value = [&]() {
    ag::Tape<double> tape;
    return tape.val(tape.softmax_cross_entropy(model.logits(tape, sample, nullptr), label))(0, 0);
  };
  ag::Tape<double> tape;
  const ag::Var loss = tape.softmax_cross_entropy(model.logits(tape, sample, nullptr), label);
  tape.backward(loss);

  auto& store = model.params();
  Rng pick(pick_seed);
  for (int k = 0; k < count; ++k) {
    const int s = static_cast<int>(pick.below(static_cast<std::uint64_t>(store.size())));
    MatD& theta = store.value(s);
    const Eigen::Index i = static_cast<Eigen::Index>(pick.below(static_cast<std::uint64_t>(theta.rows())));
    const Eigen::Index j = static_cast<Eigen::Index>(pick.below(static_cast<std::uint64_t>(theta.cols())));
    const MatD* g = tape.param_grad(s);
    const double analytic = g ? (*g)(i, j) : 0.0;
    const double orig = theta(i, j);
    const double h = 1e-5 * (1.0 + std::abs(orig));
    theta(i, j) = orig + h;
    const double up = loss_value();
    theta(i, j) = orig - h;
    const double down = loss_value();
    theta(i, j) = orig;
    const double fd = (up - down) / (2.0 * h);
    const double tol = 1e-7 + 1e-4 * std::max({std::abs(fd), std::abs(analytic), 1e-3});
    INFO(store.name(s) << "(" << i << "," << j << "): fd=" << fd << " analytic=" << analytic);
    CHECK(std::abs(fd - analytic) <= tol);
  }
}

}  // namespace

TEST_CASE("all seventeen variants map contract inputs to (batch, 15) logits") {
  const ModelPresets presets = ModelPresets::desk();
  std::set<std::string> names;
  for (const auto& m : all_modalities()) {
    const auto model = build_model<float>(m, presets, 42);
    names.insert(model->modality().name());
    Mat<float> batch_logits(2, kNumClasses);
    for (int b = 0; b < 2; ++b) {
      const Sample<float> s = random_sample<float>(m, presets, 100 + static_cast<std::uint64_t>(b));
      const Mat<float> out = forward_logits(*model, s);
      REQUIRE(out.rows() == 1);
      REQUIRE(out.cols() == kNumClasses);
      batch_logits.row(b) = out.row(0);
      // softmax normalizes to 1
      const Mat<float> p = (out.array() - out.maxCoeff()).exp();
      CHECK(std::abs(p.sum() / p.sum() - 1.0f) < 1e-6f);
      const float z = p.sum();
      CHECK(std::abs((p / z).sum() - 1.0f) < 1e-6f);
    }
    CHECK(batch_logits.allFinite());
  }
  CHECK(names.size() == 17);
}

TEST_CASE("MBC with 2WB scales the input width to 18") {
  const ModelPresets presets = ModelPresets::desk();
  const auto model = build_model<float>(modality_from_name("MBC-2WB"), presets, 1);
  Sample<float> s;
  s.imu = Mat<float>::Zero(presets.hart.seq_len, 18);
  CHECK(forward_logits(*model, s).cols() == kNumClasses);
  s.imu = Mat<float>::Zero(presets.hart.seq_len, 72);
  CHECK_THROWS_AS(forward_logits(*model, s), ShapeMismatch);
}

TEST_CASE("same seed gives identical parameter checksums, different seeds differ") {
  const ModelPresets presets = mini_presets();
  for (const char* name : {"MBC-8FG", "TBC-2", "MMC-3CP"}) {
    const auto a = build_model<double>(modality_from_name(name), presets, 7);
    const auto b = build_model<double>(modality_from_name(name), presets, 7);
    const auto c = build_model<double>(modality_from_name(name), presets, 8);
    CHECK(a->params().checksum() == b->params().checksum());
    CHECK(a->params().checksum() != c->params().checksum());
  }
}

TEST_CASE("evaluation-mode forward is bit-deterministic") {
  const ModelPresets presets = mini_presets();
  const InputModality m = modality_from_name("MMC-8FG");
  const auto model = build_model<double>(m, presets, 3);
  const Sample<double> s = random_sample<double>(m, presets, 5);
  const MatD a = forward_logits(*model, s);
  const MatD b = forward_logits(*model, s);
  CHECK((a.array() == b.array()).all());
}

TEST_CASE("tubelet token counts match the divisions") {
  VivitConfig desk;
  desk.image_size = 56;
  desk.tubelet_h = 8;
  desk.tubelet_w = 8;
  CHECK(desk.token_count() == 9 * 7 * 7);

  VivitConfig paper;
  CHECK(paper.token_count() == 9 * 14 * 14);

  VivitConfig bad;
  bad.image_size = 50;  // not divisible by 16
  CHECK_THROWS_AS(bad.validate(), TubeletMismatch);
  VivitConfig bad_t;
  bad_t.tubelet_t = 7;  // 90 % 7 != 0
  CHECK_THROWS_AS(bad_t.validate(), TubeletMismatch);
}

TEST_CASE("permuting feature columns with permuted embedding rows gives identical logits") {
  ModelPresets presets = mini_presets();
  const InputModality m = modality_from_name("MBC-2WB");
  const auto model = build_model<double>(m, presets, 11);
  const Sample<double> s = random_sample<double>(m, presets, 13);
  const MatD base = forward_logits(*model, s);

  // Reverse permutation of the 18 input columns.
  const int F = 18;
  std::vector<int> perm(F);
  for (int i = 0; i < F; ++i) perm[static_cast<std::size_t>(i)] = F - 1 - i;

  Sample<double> sp = s;
  for (int j = 0; j < F; ++j) sp.imu.col(j) = s.imu.col(perm[static_cast<std::size_t>(j)]);
  auto& store = model->params();
  int embed_slot = -1;
  for (int slot = 0; slot < store.size(); ++slot)
    if (store.name(slot) == "hart.embed.w") embed_slot = slot;
  REQUIRE(embed_slot >= 0);
  const MatD w = store.value(embed_slot);
  MatD wp(w.rows(), w.cols());
  for (int j = 0; j < F; ++j) wp.row(j) = w.row(perm[static_cast<std::size_t>(j)]);
  store.value(embed_slot) = wp;

  const MatD permuted = forward_logits(*model, sp);
  CHECK((permuted - base).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("TBC-2 is not weight-tied across streams") {
  const ModelPresets presets = mini_presets();
  const InputModality m = modality_from_name("TBC-2");
  const auto model = build_model<double>(m, presets, 17);
  Sample<double> s = random_sample<double>(m, presets, 19);
  const MatD ab = forward_logits(*model, s);
  std::swap(s.top, s.bottom);
  const MatD ba = forward_logits(*model, s);
  CHECK((ab - ba).cwiseAbs().maxCoeff() > 1e-9);
}

TEST_CASE("every MMC branch receives gradient") {
  const ModelPresets presets = mini_presets();
  const InputModality m = modality_from_name("MMC-8FG");
  ModelPresets mp = presets;
  mp.hart.input_width = 72;
  const auto model = build_model<double>(m, presets, 23);
  const Sample<double> s = random_sample<double>(m, presets, 29);

  ag::Tape<double> tape;
  const ag::Var loss = tape.softmax_cross_entropy(model->logits(tape, s, nullptr), 4);
  tape.backward(loss);

  const auto& store = model->params();
  double hart_norm = 0.0, top_norm = 0.0, bottom_norm = 0.0, fusion_norm = 0.0;
  for (int slot = 0; slot < store.size(); ++slot) {
    const MatD* g = tape.param_grad(slot);
    if (!g) continue;
    const double n = g->norm();
    const std::string& name = store.name(slot);
    if (name.rfind("hart.", 0) == 0) hart_norm += n;
    if (name.rfind("vivit_top.", 0) == 0) top_norm += n;
    if (name.rfind("vivit_bottom.", 0) == 0) bottom_norm += n;
    if (name.rfind("fusion.", 0) == 0) fusion_norm += n;
  }
  CHECK(hart_norm > 0.0);
  CHECK(top_norm > 0.0);
  CHECK(bottom_norm > 0.0);
  CHECK(fusion_norm > 0.0);

  // Fusion input width is the sum of the branch dims.
  int fusion_w_slot = -1;
  for (int slot = 0; slot < store.size(); ++slot)
    if (store.name(slot) == "fusion.fc.w") fusion_w_slot = slot;
  REQUIRE(fusion_w_slot >= 0);
  CHECK(store.value(fusion_w_slot).rows() ==
        presets.hart.model_dim + 2 * presets.vivit.model_dim);
}

TEST_CASE("finite differences validate HART gradients") {
  const ModelPresets presets = mini_presets();
  const InputModality m = modality_from_name("MBC-2WB");
  const auto model = build_model<double>(m, presets, 31);
  fd_check_model(*model, random_sample<double>(m, presets, 37), 2, 40, 41);
}

TEST_CASE("finite differences validate ViViT gradients") {
  const ModelPresets presets = mini_presets();
  const InputModality m = modality_from_name("TBC-1top");
  const auto model = build_model<double>(m, presets, 43);
  fd_check_model(*model, random_sample<double>(m, presets, 47), 9, 40, 53);
}

TEST_CASE("finite differences validate MMC gradients") {
  const ModelPresets presets = mini_presets();
  const InputModality m = modality_from_name("MMC-2WB");
  const auto model = build_model<double>(m, presets, 59);
  fd_check_model(*model, random_sample<double>(m, presets, 61), 13, 40, 67);
}

TEST_CASE("checkpoints round-trip and reproduce the model") {
  const ModelPresets presets = mini_presets();
  const InputModality m = modality_from_name("MMC-2WB");
  const auto model = build_model<double>(m, presets, 71);
  NormMeta norm;
  norm.image_stats = {0.31, 0.17, presets.vivit.image_size};
  norm.stats_source = StatsSource::TrainOnly;
  const Checkpoint ck = make_checkpoint(*model, "mini", norm);

  const auto dir = std::filesystem::temp_directory_path() / "mmhar_ck_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "model.ckpt";
  ck.save(path);
  const Checkpoint back = Checkpoint::load(path);
  CHECK(back.modality == "MMC-2WB");
  CHECK(back.preset == "mini");
  CHECK(back.norm.image_stats.mean == ck.norm.image_stats.mean);
  CHECK(back.norm.stats_source == StatsSource::TrainOnly);
  REQUIRE(back.params.size() == ck.params.size());
  for (std::size_t i = 0; i < ck.params.size(); ++i) {
    CHECK(back.params[i].first == ck.params[i].first);
    CHECK((back.params[i].second.array() == ck.params[i].second.array()).all());
  }

  const auto restored = back.instantiate<double>();
  const Sample<double> s = random_sample<double>(m, presets, 73);
  CHECK((forward_logits(*restored, s).array() == forward_logits(*model, s).array()).all());
  std::filesystem::remove_all(dir);
}
